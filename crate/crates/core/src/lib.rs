//! Grid-based Gaussian movement models for AIS vessel traffic, trained
//! centrally or by federated rounds over a framed byte protocol, and the
//! anomaly detection, event and cost analyses built on them.
//!
//! The types most callers need are re-exported at the crate root.

// Moment and matrix code indexes several arrays with the same (i, j).
#![allow(clippy::needless_range_loop)]

pub mod events;
pub mod federation;
pub mod inference;
pub mod ingestion;
pub mod model;
pub mod synthetic;
pub mod training;

pub use events::{AnomalyEvent, ConfusionCounts};
pub use federation::{CostLedger, CostReport, FederationConfig, FederationError};
pub use inference::{AnomalyRow, DetectionThresholds, ModelSet, ScoreReport, Verdict};
pub use ingestion::{AisRecord, AntennaSpec, ChunkDescriptor, RoundPlan};
pub use model::{aggregate, CellIndex, GridConfig, Hyperparams, M3Model, ModelConfig, Prototype, ShipType, StateVector};
