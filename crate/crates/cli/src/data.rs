use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use chrono::NaiveDate;
use clap::{Args, ValueEnum};

use m3fed_core::ingestion::{
    assign_to_antennas, coverage_filter, csv_upload_bytes, sort_by_time, write_ais_csv, DropStats,
};
use m3fed_core::synthetic::{
    disjoint_cargo_lanes, generate, gothenburg_lanes, write_labels_csv, write_noisy_ais_csv, SyntheticConfig,
};

use crate::{create, read_records, SettingsArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LaneSet {
    /// Cargo, tanker and passenger lanes through the Gothenburg antennas.
    Gothenburg,
    /// Three parallel cargo lanes far enough apart to share no grid cell.
    Disjoint,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// AISDK-format CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth sidecar listing every injected anomalous record.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// First UTC day, YYYY-MM-DD.
    #[arg(long, default_value = "2018-07-01")]
    pub start: NaiveDate,
    #[arg(long, default_value_t = 1)]
    pub days: u32,
    #[arg(long, default_value_t = 10)]
    pub trips_per_lane: u32,
    /// Probability that a trip carries one injected anomaly.
    #[arg(long, default_value_t = 0.0)]
    pub anomaly_rate: f64,
    /// Extra rows the ingest filter must drop (other ship type, missing SOG).
    #[arg(long, default_value_t = 0)]
    pub dirty_rows: usize,
    #[arg(long, value_enum, default_value_t = LaneSet::Gothenburg)]
    pub lanes: LaneSet,
}

pub fn gen_synthetic(a: &GenArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.anomaly_rate) {
        bail!("anomaly rate must be in [0, 1], got {}", a.anomaly_rate);
    }
    if a.days == 0 {
        bail!("need at least one day");
    }
    let cfg = SyntheticConfig {
        seed: a.seed,
        start: a.start,
        days: a.days,
        lanes: match a.lanes {
            LaneSet::Gothenburg => gothenburg_lanes(),
            LaneSet::Disjoint => disjoint_cargo_lanes(),
        },
        trips_per_lane_per_day: a.trips_per_lane,
        anomaly_rate: a.anomaly_rate,
        ..Default::default()
    };
    let data = generate(&cfg);
    write_noisy_ais_csv(create(&a.out)?, &data.records, a.dirty_rows)?;
    if let Some(path) = &a.labels {
        write_labels_csv(create(path)?, &data.labels)?;
    }
    println!(
        "{} records ({} labelled anomalous, {} dirty rows) over {} days -> {}",
        data.records.len(),
        data.labels.len(),
        a.dirty_rows,
        a.days,
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// AISDK CSV files; may be repeated.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Receives records.csv and one client-<n>.csv per antenna.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

fn print_drops(path: &Path, s: &DropStats) {
    println!(
        "{}: {} rows, {} kept, dropped {} other type, {} incomplete, {} unparseable",
        path.display(),
        s.rows,
        s.emitted,
        s.other_type,
        s.missing_field,
        s.unparseable
    );
}

pub fn ingest(a: &IngestArgs, cfg: Option<&Path>) -> Result<()> {
    let settings = a.settings.resolve(cfg)?;
    let mut records = Vec::new();
    for path in &a.inputs {
        let (mut r, stats) = read_records(path)?;
        print_drops(path, &stats);
        records.append(&mut r);
    }
    sort_by_time(&mut records);
    let assignment = assign_to_antennas(&records, &settings.antennas)?;
    if settings.coverage_filter {
        records = coverage_filter(&records, &settings.antennas);
    }
    if records.is_empty() {
        bail!("no usable records in the input");
    }

    write_ais_csv(create(&a.out_dir.join("records.csv"))?, &records)?;
    for (i, part) in assignment.per_antenna.iter().enumerate() {
        write_ais_csv(create(&a.out_dir.join(format!("client-{}.csv", i + 1)))?, part)?;
    }

    let s = &assignment.stats;
    let days: BTreeSet<NaiveDate> = records.iter().map(|r| r.timestamp.date_naive()).collect();
    println!(
        "coverage: {} in, {} outside every antenna, {:.1}% of covered records on more than one client",
        s.input,
        s.dropped,
        100.0 * s.overlap_fraction()
    );
    for (i, n) in s.per_antenna.iter().enumerate() {
        println!("client {}: {n} records", i + 1);
    }
    println!(
        "records.csv: {} records over {} days, {} bytes as centralized upload",
        records.len(),
        days.len(),
        csv_upload_bytes(&records)
    );
    Ok(())
}
