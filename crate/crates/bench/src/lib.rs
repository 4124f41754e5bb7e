//! Fixtures for the criterion benchmarks in `benches/`.

use m3fed_core::ingestion::AisRecord;
use m3fed_core::model::{GridConfig, M3Model, ModelConfig, ShipType, StateVector};
use m3fed_core::synthetic::{generate, SyntheticConfig};
use m3fed_core::training::{train_central, training_sequence};

/// Default-grid cargo configuration.
pub fn cargo_config() -> ModelConfig {
    ModelConfig::with_defaults(GridConfig::default(), ShipType::Cargo)
}

/// Deterministic Gothenburg traffic, all three ship types.
pub fn traffic(seed: u64, days: u32, trips_per_lane: u32) -> Vec<AisRecord> {
    generate(&SyntheticConfig {
        seed,
        days,
        trips_per_lane_per_day: trips_per_lane,
        ..Default::default()
    })
    .records
}

/// Cargo state vectors in training order.
pub fn cargo_states(records: &[AisRecord]) -> Vec<StateVector> {
    training_sequence(&cargo_config(), records)
}

pub fn trained_cargo(records: &[AisRecord]) -> M3Model {
    train_central(cargo_config(), records)
}
