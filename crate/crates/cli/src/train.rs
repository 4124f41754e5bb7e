use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, ValueEnum};

use m3fed_core::federation::{
    connect_tcp, run_client, run_federated, serve, ChunkSource, CostLedger, FederationConfig, FederationError,
    LocalData, Transport,
};
use m3fed_core::ingestion::{assign_to_antennas, chunk_by_day, AisRecord, RoundPlan};
use m3fed_core::model::{M3Model, ShipType};
use m3fed_core::training::{train_central, train_chunked};

use crate::config::Settings;
use crate::{create, read_records, ship_types, write_bytes, write_models, SettingsArgs, ShipTypeArg};

const CLIENT_BACKOFF: Duration = Duration::from_millis(500);

#[derive(Debug, Args)]
pub struct CentralArgs {
    /// AISDK CSV with the training records.
    #[arg(long)]
    pub data: PathBuf,
    /// Receives one `<type>.m3` per ship type present in the data.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum)]
    pub ship_type: Option<ShipTypeArg>,
    /// Train each day chunk from the empty model and aggregate chunk by
    /// chunk, as the federation does, instead of one sequential pass.
    #[arg(long)]
    pub chunked: bool,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn train_central_cmd(a: &CentralArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let (records, _) = read_records(&a.data)?;
    let plan = if a.chunked && !records.is_empty() {
        Some(chunk_by_day(&records, settings.days_per_round)?)
    } else {
        None
    };
    let mut models = Vec::new();
    for t in ship_types(a.ship_type) {
        let config = settings.model_config(t);
        let n = records.iter().filter(|r| r.ship_type == t).count();
        if n == 0 {
            continue;
        }
        models.push(match &plan {
            Some(plan) => train_chunked(config, plan, &records)?,
            None => train_central(config, &records),
        });
    }
    if models.is_empty() {
        bail!("no training records in {}", a.data.display());
    }
    write_models(&a.out_dir, &models)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Inprocess,
    Tcp,
}

#[derive(Debug, Args)]
pub struct FederatedArgs {
    /// One AISDK CSV split across the configured antennas, one client each.
    #[arg(long, conflicts_with = "client_data", required_unless_present = "client_data")]
    pub data: Option<PathBuf>,
    /// One AISDK CSV per client, in client-id order; may be repeated.
    #[arg(long)]
    pub client_data: Vec<PathBuf>,
    /// Receives `<type>.m3` and `ledger.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// `tcp` runs the same federation over loopback sockets.
    #[arg(long, value_enum, default_value_t = Mode::Inprocess)]
    pub mode: Mode,
    #[arg(long, value_enum)]
    pub ship_type: Option<ShipTypeArg>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

fn client_records(a: &FederatedArgs, settings: &Settings) -> Result<Vec<Vec<AisRecord>>> {
    if let Some(path) = &a.data {
        let (records, _) = read_records(path)?;
        return Ok(assign_to_antennas(&records, &settings.antennas)?.per_antenna);
    }
    a.client_data.iter().map(|p| Ok(read_records(p)?.0)).collect()
}

fn federation_config(settings: &Settings, n_clients: usize, plan: &RoundPlan) -> FederationConfig {
    let mut fc = FederationConfig::new(n_clients as u32, plan.len() as u32);
    fc.return_global = settings.return_global;
    fc.seed_from_global = settings.seed_from_global;
    fc
}

pub fn train_federated_cmd(a: &FederatedArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let clients = client_records(a, &settings)?;
    let plan = chunk_by_day(clients.iter().flatten(), settings.days_per_round)?;
    if plan.is_empty() {
        bail!("no training records for any client");
    }
    let mut fc = federation_config(&settings, clients.len(), &plan);
    if a.mode == Mode::Tcp {
        fc.transport = Transport::Tcp;
        fc.listen_address = "127.0.0.1:0".into();
    }

    let mut models = Vec::new();
    let mut ledger = CostLedger::new();
    for t in ship_types(a.ship_type) {
        let data: Vec<LocalData> = clients
            .iter()
            .map(|c| LocalData::new(c.iter().filter(|r| r.ship_type == t).cloned().collect()))
            .collect();
        if data.iter().all(|d| d.records().is_empty()) {
            continue;
        }
        let sources: Vec<&dyn ChunkSource> = data.iter().map(|d| d as &dyn ChunkSource).collect();
        let out = run_federated(&fc, settings.model_config(t), &plan, &sources)
            .with_context(|| format!("{t} federation"))?;
        for e in out.ledger.entries() {
            ledger.record_transfer(e.round, e.direction, e.client, e.category, e.bytes);
        }
        models.push(out.model);
    }
    if models.is_empty() {
        bail!("no training records of the requested ship type");
    }
    println!("{} clients, {} rounds", clients.len(), plan.len());
    write_models(&a.out_dir, &models)?;
    let path = a.out_dir.join("ledger.csv");
    ledger.write_csv(create(&path)?)?;
    println!("{} ledger entries, {} bytes -> {}", ledger.entries().len(), ledger.total(), path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Number of client sessions to wait for.
    #[arg(long)]
    pub clients: u32,
    /// Number of rounds; with `--data`, must match the data's round count.
    #[arg(long)]
    pub rounds: Option<u32>,
    /// First day of round 1, YYYY-MM-DD. Needs `--rounds`.
    #[arg(long, conflicts_with = "data")]
    pub start: Option<NaiveDate>,
    /// Derive the round plan from the days present in this AISDK CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ShipTypeArg::Cargo)]
    pub ship_type: ShipTypeArg,
    /// Receives `<type>.m3` and `ledger.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

fn server_plan(a: &ServeArgs, settings: &Settings) -> Result<RoundPlan> {
    let k = settings.days_per_round;
    match (a.start, &a.data) {
        (Some(start), _) => {
            let Some(t) = a.rounds else {
                bail!("--start needs --rounds");
            };
            Ok(RoundPlan::consecutive(start, t, k)?)
        }
        (None, Some(path)) => {
            let (records, _) = read_records(path)?;
            let plan = chunk_by_day(&records, k)?;
            if let Some(t) = a.rounds.filter(|&t| t as usize != plan.len()) {
                bail!("--rounds {t} but {} holds {} rounds", path.display(), plan.len());
            }
            Ok(plan)
        }
        (None, None) => bail!("give --start and --rounds, or --data"),
    }
}

pub fn serve_cmd(a: &ServeArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let plan = server_plan(a, &settings)?;
    let mut fc = federation_config(&settings, a.clients as usize, &plan);
    fc.transport = Transport::Tcp;
    fc.listen_address = settings.listen.clone();
    let config = settings.model_config(a.ship_type.into());

    let result = serve(&fc, config, &plan, |addr| {
        println!("listening on {addr}");
        let _ = std::io::stdout().flush();
    });
    let ledger_path = a.out_dir.join("ledger.csv");
    match result {
        Ok(out) => {
            write_models(&a.out_dir, std::slice::from_ref(&out.model))?;
            out.ledger.write_csv(create(&ledger_path)?)?;
            println!("{} ledger entries -> {}", out.ledger.entries().len(), ledger_path.display());
            Ok(())
        }
        Err(FederationError::Aborted(abort)) => {
            abort.ledger.write_csv(create(&ledger_path)?)?;
            bail!(
                "federation aborted in round {}: {}; partial ledger in {}, last complete global model covers {} records",
                abort.round,
                abort.reason,
                ledger_path.display(),
                abort.last_global.trained_records()
            )
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    /// Server address, host:port.
    #[arg(long)]
    pub connect: String,
    #[arg(long)]
    pub client_id: u32,
    /// This client's AISDK CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ShipTypeArg::Cargo)]
    pub ship_type: ShipTypeArg,
    /// Write this client's view of the ledger.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    /// Write the last global model received (needs return_global on the server).
    #[arg(long)]
    pub global_out: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn client_cmd(a: &ClientArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let ship_type: ShipType = a.ship_type.into();
    let (records, _) = read_records(&a.data)?;
    let source = LocalData::new(records.into_iter().filter(|r| r.ship_type == ship_type).collect());
    let mut channel =
        connect_tcp(a.connect.as_str(), CLIENT_BACKOFF).with_context(|| format!("connecting to {}", a.connect))?;
    let out = run_client(
        &mut channel,
        a.client_id,
        settings.model_config(ship_type),
        &source,
        settings.seed_from_global,
    )?;
    println!("client {}: trained {} rounds", out.client_id, out.rounds_trained);
    if let Some(path) = &a.ledger {
        out.ledger.write_csv(create(path)?)?;
    }
    if let Some(path) = &a.global_out {
        let Some(global) = &out.global else {
            bail!("the server sent no global model");
        };
        write_bytes(path, &M3Model::to_bytes(global))?;
    }
    Ok(())
}
