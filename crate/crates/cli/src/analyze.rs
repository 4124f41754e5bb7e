use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Duration;
use clap::{ArgGroup, Args};

use m3fed_core::events::{
    compare_outputs, confusion_report, event_overlaps, event_stats, format_histogram, group_events,
    write_events_csv, VerdictCounts,
};
use m3fed_core::federation::{format_cost_report, summarize_costs, CostLedger};
use m3fed_core::inference::{detect_batch, read_anomaly_csv, write_anomaly_csv, AnomalyRow, ModelSet};
use m3fed_core::ingestion::{csv_upload_bytes, AisCsvReader};
use m3fed_core::model::ShipType;

use crate::geojson::{anomaly_features, event_features, model_features};
use crate::{create, model_path, read_model, read_records, require_dir, require_file, write_bytes, SettingsArgs};

fn open(path: &Path) -> Result<BufReader<File>> {
    require_file(path)?;
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_anomalies(path: &Path) -> Result<Vec<AnomalyRow>> {
    read_anomaly_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

/// Every `<type>.m3` present in `dir`.
fn read_model_set(dir: &Path) -> Result<ModelSet> {
    require_dir(dir)?;
    let mut set = ModelSet::new();
    for t in ShipType::ALL {
        let path = model_path(dir, t);
        if !path.exists() {
            continue;
        }
        let m = read_model(&path)?;
        if m.config().ship_type != t {
            bail!("{} holds a {} model", path.display(), m.config().ship_type);
        }
        set.insert(m);
    }
    if set.is_empty() {
        bail!("no <type>.m3 model files in {}", dir.display());
    }
    Ok(set)
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Directory with `<type>.m3` files; records use the model of their type.
    #[arg(long)]
    pub models: PathBuf,
    /// AISDK CSV to score.
    #[arg(long)]
    pub data: PathBuf,
    /// Anomaly CSV with every scored record in input order.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn detect(a: &DetectArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let models = read_model_set(&a.models)?;
    let reader = AisCsvReader::new(open(&a.data)?)?;
    let d = detect_batch(&models, reader, &settings.thresholds);
    let rows: Vec<AnomalyRow> = d.records.iter().map(AnomalyRow::from).collect();
    write_anomaly_csv(create(&a.out)?, &rows)?;
    let s = &d.stats;
    println!(
        "{} scored ({} without a model, {} rows dropped): {} normal, {} position, {} speed, {} direction -> {}",
        s.scored,
        s.skipped_other_type,
        s.row_errors,
        s.normal,
        s.position,
        s.speed,
        s.direction,
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EventsArgs {
    /// Anomaly CSV from `detect`.
    #[arg(long)]
    pub anomalies: PathBuf,
    /// Event CSV, one line per event.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the duration histogram here.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn events(a: &EventsArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let rows = read_anomalies(&a.anomalies)?;
    let events = group_events(&rows, Duration::seconds(settings.max_gap_s));
    write_events_csv(create(&a.out)?, &events)?;
    let text = format_histogram(&event_stats(&events));
    if let Some(path) = &a.histogram {
        write_text(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Reference anomaly CSV (table rows).
    #[arg(long)]
    pub baseline: PathBuf,
    /// Anomaly CSV of the model under comparison (table columns).
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "M3")]
    pub baseline_name: String,
    #[arg(long, default_value = "M3fed")]
    pub candidate_name: String,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn compare(a: &CompareArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let base = read_anomalies(&a.baseline)?;
    let cand = read_anomalies(&a.candidate)?;
    let c = compare_outputs(&base, &cand)?;
    let mut report = confusion_report(
        &c,
        (&a.baseline_name, VerdictCounts::of(&base)),
        (&a.candidate_name, VerdictCounts::of(&cand)),
    );
    let gap = Duration::seconds(settings.max_gap_s);
    let overlap = event_overlaps(&group_events(&base, gap), &group_events(&cand, gap));
    report.push_str(&format!(
        "\nevents: {} {} ({} overlap a {} event), {} {} ({} overlap a {} event)\n",
        overlap.a_total,
        a.baseline_name,
        overlap.a_matched,
        a.candidate_name,
        overlap.b_total,
        a.candidate_name,
        overlap.b_matched,
        a.baseline_name,
    ));
    write_text(&a.out, &report)?;
    print!("{report}");
    Ok(())
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("baseline").required(true).args(["baseline_bytes", "baseline_data"])))]
pub struct CostsArgs {
    /// Ledger CSV from a federated run.
    #[arg(long)]
    pub ledger: PathBuf,
    /// Bytes centralized training would upload.
    #[arg(long)]
    pub baseline_bytes: Option<u64>,
    /// AISDK CSV whose records centralized training would upload.
    #[arg(long)]
    pub baseline_data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn costs(a: &CostsArgs) -> Result<()> {
    let ledger = CostLedger::read_csv(open(&a.ledger)?).with_context(|| format!("reading {}", a.ledger.display()))?;
    let baseline = match (a.baseline_bytes, &a.baseline_data) {
        (Some(b), _) => b,
        (None, Some(path)) => csv_upload_bytes(&read_records(path)?.0),
        (None, None) => unreachable!("clap requires one baseline"),
    };
    let report = format_cost_report(&summarize_costs(&ledger, baseline)?);
    if let Some(path) = &a.out {
        write_text(path, &report)?;
    }
    print!("{report}");
    Ok(())
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["model", "anomalies", "events"])))]
pub struct ExportArgs {
    /// Model file; one Point per prototype.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Anomaly CSV; one Point per anomalous record.
    #[arg(long)]
    pub anomalies: Option<PathBuf>,
    /// Anomaly CSV grouped into events; one LineString per event.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// With `--anomalies`, export normal records too.
    #[arg(long)]
    pub include_normal: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn export_geojson(a: &ExportArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let value = if let Some(path) = &a.model {
        model_features(&read_model(path)?)
    } else if let Some(path) = &a.anomalies {
        let rows = read_anomalies(path)?;
        anomaly_features(rows.iter().filter(|r| a.include_normal || r.verdict.is_anomaly()))
    } else if let Some(path) = &a.events {
        let rows = read_anomalies(path)?;
        event_features(&group_events(&rows, Duration::seconds(settings.max_gap_s)))
    } else {
        unreachable!("clap requires one input")
    };
    let n = value["features"].as_array().map_or(0, Vec::len);
    write_bytes(&a.out, serde_json::to_string_pretty(&value)?.as_bytes())?;
    println!("{n} features -> {}", a.out.display());
    Ok(())
}
