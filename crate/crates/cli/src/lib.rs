//! The `m3fed` command line: synthetic data, ingestion, centralized and
//! federated training, detection and the analyses built on it.

pub mod config;
pub mod geojson;

mod analyze;
mod data;
mod train;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use m3fed_core::ingestion::{parse_ais_csv, AisRecord, DropStats};
use m3fed_core::model::{M3Model, ShipType};

use config::{RunConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "m3fed", version, about = "Federated grid movement models for AIS anomaly detection")]
pub struct Cli {
    /// TOML file with run settings; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate lane-following AIS traffic with optional injected anomalies.
    GenSynthetic(data::GenArgs),
    /// Parse and filter AISDK CSVs and split them by antenna coverage.
    Ingest(data::IngestArgs),
    /// Train one model per ship type on all records in time order.
    TrainCentral(train::CentralArgs),
    /// Run server and clients in one process and write the global models.
    TrainFederated(train::FederatedArgs),
    /// Federation server for separate client processes.
    Serve(train::ServeArgs),
    /// Federation client connecting to a running server.
    Client(train::ClientArgs),
    /// Score records against trained models.
    Detect(analyze::DetectArgs),
    /// Group anomalous records into events and summarize their durations.
    Events(analyze::EventsArgs),
    /// Confusion table of two anomaly outputs over the same records.
    Compare(analyze::CompareArgs),
    /// Communication cost summary of a federation ledger.
    Costs(analyze::CostsArgs),
    /// Write a model, anomalies or events as GeoJSON.
    ExportGeojson(analyze::ExportArgs),
}

/// Flags shared by every command that reads run settings.
#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    #[command(flatten)]
    pub overrides: RunConfig,
}

impl SettingsArgs {
    fn resolve(&self, file: Option<&Path>) -> Result<Settings> {
        let base = match file {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        self.overrides.clone().over(base).resolve()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShipTypeArg {
    Cargo,
    Tanker,
    Passenger,
}

impl From<ShipTypeArg> for ShipType {
    fn from(t: ShipTypeArg) -> Self {
        match t {
            ShipTypeArg::Cargo => ShipType::Cargo,
            ShipTypeArg::Tanker => ShipType::Tanker,
            ShipTypeArg::Passenger => ShipType::Passenger,
        }
    }
}

/// The requested ship type, or all three.
fn ship_types(only: Option<ShipTypeArg>) -> Vec<ShipType> {
    match only {
        Some(t) => vec![t.into()],
        None => ShipType::ALL.to_vec(),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.as_deref();
    if let Some(path) = cfg {
        require_file(path)?;
    }
    match cli.command {
        Command::GenSynthetic(a) => data::gen_synthetic(&a),
        Command::Ingest(a) => data::ingest(&a, cfg),
        Command::TrainCentral(a) => train::train_central_cmd(&a, cfg),
        Command::TrainFederated(a) => train::train_federated_cmd(&a, cfg),
        Command::Serve(a) => train::serve_cmd(&a, cfg),
        Command::Client(a) => train::client_cmd(&a, cfg),
        Command::Detect(a) => analyze::detect(&a, cfg),
        Command::Events(a) => analyze::events(&a, cfg),
        Command::Compare(a) => analyze::compare(&a, cfg),
        Command::Costs(a) => analyze::costs(&a),
        Command::ExportGeojson(a) => analyze::export_geojson(&a, cfg),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        bail!("directory {} does not exist", path.display());
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Reads an AISDK CSV; dropped rows are counted, never fatal.
fn read_records(path: &Path) -> Result<(Vec<AisRecord>, DropStats)> {
    require_file(path)?;
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_ais_csv(std::io::BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

/// `<dir>/<type>.m3`
pub fn model_path(dir: &Path, ship_type: ShipType) -> PathBuf {
    dir.join(format!("{}.m3", ship_type.as_str()))
}

fn read_model(path: &Path) -> Result<M3Model> {
    require_file(path)?;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    M3Model::from_bytes(&bytes).with_context(|| format!("decoding model {}", path.display()))
}

/// Writes every model as `<dir>/<type>.m3` after all of them exist, so a
/// failed run leaves no partial set behind.
fn write_models(dir: &Path, models: &[M3Model]) -> Result<()> {
    for m in models {
        let path = model_path(dir, m.config().ship_type);
        write_bytes(&path, &m.to_bytes())?;
        println!(
            "{}: {} records, {} cells, {} prototypes -> {}",
            m.config().ship_type,
            m.trained_records(),
            m.cell_count(),
            m.prototype_count(),
            path.display()
        );
    }
    Ok(())
}
