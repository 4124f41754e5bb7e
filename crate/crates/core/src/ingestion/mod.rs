//! AIS input: CSV parsing and filtering, antenna coverage assignment and
//! chunking into daily federation rounds.

mod aisdk;
pub(crate) use aisdk::ship_type_label;
mod antenna;
mod rounds;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::model::{ShipType, StateVector};

pub use aisdk::{
    csv_upload_bytes, parse_ais_csv, write_ais_csv, AisCsvReader, DropReason, DropStats, AIS_CSV_HEADER,
    RowRejection, AIS_TIMESTAMP_FORMAT,
};
pub use antenna::{
    assign_to_antennas, coverage_filter, default_antennas, haversine_m, AntennaSpec, Assignment,
    CoverageStats, EARTH_RADIUS_M,
};
pub use rounds::{chunk_by_day, ChunkDescriptor, RoundPlan};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read AIS input: {0}")]
    Io(#[from] std::io::Error),
    #[error("AIS csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("AIS header lacks column {0:?}")]
    MissingColumn(&'static str),
    #[error("invalid antenna: {0}")]
    InvalidAntenna(String),
    #[error("invalid chunk descriptor {0:?}")]
    InvalidChunk(String),
    #[error("invalid round plan: {0}")]
    InvalidPlan(String),
}

/// One complete AIS position report of a cargo, tanker or passenger vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct AisRecord {
    pub mmsi: u32,
    pub timestamp: DateTime<Utc>,
    pub state: StateVector,
    pub ship_type: ShipType,
}

/// Stable sort by timestamp, the training order for every model.
pub fn sort_by_time(records: &mut [AisRecord]) {
    records.sort_by_key(|r| r.timestamp);
}
