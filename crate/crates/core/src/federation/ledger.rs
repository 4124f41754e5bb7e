use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::protocol::{Message, MODEL_FRAME_OVERHEAD};
use super::FederationError;

pub const LEDGER_CSV_HEADER: [&str; 5] = ["round", "direction", "client", "category", "bytes"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ClientToServer => "client_to_server",
            Direction::ServerToClient => "server_to_client",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = FederationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "client_to_server" => Ok(Direction::ClientToServer),
            "server_to_client" => Ok(Direction::ServerToClient),
            other => Err(FederationError::Ledger(format!("unknown direction {other:?}"))),
        }
    }
}

/// Model messages carry parameters; everything else is control traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Model,
    Control,
}

impl Category {
    pub fn of(msg: &Message) -> Self {
        if msg.is_model() {
            Category::Model
        } else {
            Category::Control
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Model => "model",
            Category::Control => "control",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = FederationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(Category::Model),
            "control" => Ok(Category::Control),
            other => Err(FederationError::Ledger(format!("unknown category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerEntry {
    /// 1-based; 0 for session setup.
    pub round: u32,
    pub direction: Direction,
    pub client: u32,
    pub category: Category,
    /// Whole frame, header included.
    pub bytes: u64,
}

/// Append-only log of every frame exchanged, one entry per message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    entries: Vec<LedgerEntry>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_transfer(&mut self, round: u32, direction: Direction, client: u32, category: Category, bytes: u64) {
        self.entries.push(LedgerEntry {
            round,
            direction,
            client,
            category,
            bytes,
        });
    }

    pub fn record_message(&mut self, round: u32, direction: Direction, client: u32, msg: &Message, bytes: u64) {
        self.record_transfer(round, direction, client, Category::of(msg), bytes);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.bytes).sum()
    }

    pub fn total_for(&self, direction: Direction, category: Category) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.direction == direction && e.category == category)
            .map(|e| e.bytes)
            .sum()
    }

    pub fn count_for(&self, direction: Direction, category: Category) -> usize {
        self.entries
            .iter()
            .filter(|e| e.direction == direction && e.category == category)
            .count()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), FederationError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(LEDGER_CSV_HEADER)?;
        for e in &self.entries {
            w.write_record([
                e.round.to_string(),
                e.direction.to_string(),
                e.client.to_string(),
                e.category.to_string(),
                e.bytes.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, FederationError> {
        let mut r = csv::Reader::from_reader(source);
        if r.headers()?.iter().ne(LEDGER_CSV_HEADER.iter().copied()) {
            return Err(FederationError::Ledger("unexpected ledger header".into()));
        }
        let mut ledger = Self::new();
        for (i, row) in r.records().enumerate() {
            let row = row?;
            let bad = |field: &str| FederationError::Ledger(format!("line {}: bad {field}", i + 2));
            ledger.entries.push(LedgerEntry {
                round: row[0].parse().map_err(|_| bad("round"))?,
                direction: row[1].parse()?,
                client: row[2].parse().map_err(|_| bad("client"))?,
                category: row[3].parse()?,
                bytes: row[4].parse().map_err(|_| bad("bytes"))?,
            });
        }
        Ok(ledger)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundCost {
    pub round: u32,
    pub upload_model: u64,
    pub download_model: u64,
    pub control: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub rounds: Vec<RoundCost>,
    /// Framed model bytes.
    pub upload_model_bytes: u64,
    pub download_model_bytes: u64,
    /// Model bytes without frame header and round field.
    pub raw_upload_model_bytes: u64,
    pub raw_download_model_bytes: u64,
    pub control_bytes: u64,
    pub baseline_bytes: u64,
    /// `1 - upload / baseline`.
    pub reduction_upload_only: f64,
    /// `1 - (upload + download) / baseline`.
    pub reduction_with_download: f64,
}

/// `1 - federated / baseline`.
pub fn reduction(federated: u64, baseline: u64) -> Result<f64, FederationError> {
    if baseline == 0 {
        return Err(FederationError::UndefinedReduction);
    }
    Ok(1.0 - federated as f64 / baseline as f64)
}

pub fn summarize_costs(ledger: &CostLedger, baseline_bytes: u64) -> Result<CostReport, FederationError> {
    let mut rounds: BTreeMap<u32, RoundCost> = BTreeMap::new();
    let mut raw = [0u64; 2];
    for e in ledger.entries() {
        let rc = rounds.entry(e.round).or_insert(RoundCost {
            round: e.round,
            ..Default::default()
        });
        match (e.category, e.direction) {
            (Category::Control, _) => rc.control += e.bytes,
            (Category::Model, d) => {
                let payload = e.bytes.saturating_sub(MODEL_FRAME_OVERHEAD as u64);
                if d == Direction::ClientToServer {
                    rc.upload_model += e.bytes;
                    raw[0] += payload;
                } else {
                    rc.download_model += e.bytes;
                    raw[1] += payload;
                }
            }
        }
    }
    let up = ledger.total_for(Direction::ClientToServer, Category::Model);
    let down = ledger.total_for(Direction::ServerToClient, Category::Model);
    Ok(CostReport {
        rounds: rounds.into_values().collect(),
        upload_model_bytes: up,
        download_model_bytes: down,
        raw_upload_model_bytes: raw[0],
        raw_download_model_bytes: raw[1],
        control_bytes: ledger.total_for(Direction::ClientToServer, Category::Control)
            + ledger.total_for(Direction::ServerToClient, Category::Control),
        baseline_bytes,
        reduction_upload_only: reduction(up, baseline_bytes)?,
        reduction_with_download: reduction(up + down, baseline_bytes)?,
    })
}

pub fn format_cost_report(r: &CostReport) -> String {
    format!(
        "model upload:    {} bytes ({} raw)\n\
         model download:  {} bytes ({} raw)\n\
         control:         {} bytes\n\
         baseline upload: {} bytes\n\
         reduction (upload only):     {:.2}%\n\
         reduction (with download):   {:.2}%\n\
         rounds: {}\n",
        r.upload_model_bytes,
        r.raw_upload_model_bytes,
        r.download_model_bytes,
        r.raw_download_model_bytes,
        r.control_bytes,
        r.baseline_bytes,
        100.0 * r.reduction_upload_only,
        100.0 * r.reduction_with_download,
        r.rounds.iter().filter(|rc| rc.round > 0).count(),
    )
}
