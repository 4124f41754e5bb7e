//! Federated training over a framed byte-stream protocol.
//!
//! A server holds the global model and drives synchronous rounds. In each
//! round every client trains a local model on its chunk of data and uploads
//! it; the server folds the uploads into the global model. Every frame that
//! crosses a channel is recorded in a [`CostLedger`].

mod client;
mod ledger;
pub mod protocol;
mod runner;
mod server;
mod transport;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ingestion::{AisRecord, ChunkDescriptor};
use crate::model::{DecodeError, M3Model, ModelError};

pub use client::{run_client, ClientOutcome};
pub use ledger::{
    format_cost_report, reduction, summarize_costs, Category, CostLedger, CostReport, Direction, LedgerEntry,
    RoundCost, LEDGER_CSV_HEADER,
};
pub use protocol::{error_code, Message};
pub use runner::{accept_sessions, run_federated, run_in_process, run_tcp_loopback, serve, FederationOutcome};
pub use server::{run_server, ServerOutcome};
pub use transport::{connect_tcp, in_process_pair, Channel, FramedStream, InProcessChannel};

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("transport: {0}")]
    Transport(#[from] std::io::Error),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("peer reported error {code}: {text}")]
    Remote { code: u16, text: String },
    #[error("model config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("unknown chunk {0:?}")]
    UnknownChunk(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("model payload: {0}")]
    Decode(#[from] DecodeError),
    #[error("invalid federation config: {0}")]
    InvalidConfig(String),
    #[error("ledger: {0}")]
    Ledger(String),
    #[error("ledger csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("reduction undefined for a zero-byte baseline")]
    UndefinedReduction,
    #[error("federation aborted in round {}: {}", .0.round, .0.reason)]
    Aborted(Box<Abort>),
}

/// State left behind by an aborted run. `last_global` is the model after
/// the last fully completed round.
#[derive(Debug, Clone)]
pub struct Abort {
    pub round: u32,
    pub reason: String,
    pub last_global: M3Model,
    pub ledger: CostLedger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    Tcp,
    #[default]
    InProcess,
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transport::Tcp => "tcp",
            Transport::InProcess => "inprocess",
        })
    }
}

impl FromStr for Transport {
    type Err = FederationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tcp" => Ok(Transport::Tcp),
            "inprocess" => Ok(Transport::InProcess),
            other => Err(FederationError::InvalidConfig(format!("unknown transport {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FederationConfig {
    pub n_clients: u32,
    pub n_rounds: u32,
    /// Send the global model to every client at the start of each round.
    pub return_global: bool,
    /// Clients start local training from the last received global model
    /// instead of the empty model. Requires `return_global`.
    pub seed_from_global: bool,
    pub transport: Transport,
    pub listen_address: String,
}

impl FederationConfig {
    pub fn new(n_clients: u32, n_rounds: u32) -> Self {
        Self {
            n_clients,
            n_rounds,
            return_global: false,
            seed_from_global: false,
            transport: Transport::InProcess,
            listen_address: "127.0.0.1:0".into(),
        }
    }

    pub fn validate(&self) -> Result<(), FederationError> {
        if self.n_clients == 0 || self.n_rounds == 0 {
            return Err(FederationError::InvalidConfig(format!(
                "need at least one client and one round, got N={} T={}",
                self.n_clients, self.n_rounds
            )));
        }
        if self.seed_from_global && !self.return_global {
            return Err(FederationError::InvalidConfig(
                "seed_from_global requires return_global".into(),
            ));
        }
        Ok(())
    }
}

/// A client's local data, resolvable by chunk.
pub trait ChunkSource: Sync {
    fn load(&self, chunk: &ChunkDescriptor) -> Result<Vec<AisRecord>, String>;
}

/// Records held in memory; a chunk selects those whose UTC date it contains.
#[derive(Debug, Clone, Default)]
pub struct LocalData {
    records: Vec<AisRecord>,
}

impl LocalData {
    pub fn new(records: Vec<AisRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[AisRecord] {
        &self.records
    }
}

impl ChunkSource for LocalData {
    fn load(&self, chunk: &ChunkDescriptor) -> Result<Vec<AisRecord>, String> {
        Ok(self
            .records
            .iter()
            .filter(|r| chunk.contains(r.timestamp.date_naive()))
            .cloned()
            .collect())
    }
}
