//! Centralized training: the baseline the federated model is compared with.

use crate::ingestion::{AisRecord, RoundPlan};
use crate::model::{aggregate, M3Model, ModelConfig, ModelError, StateVector};

/// States of the records matching the model's ship type, in timestamp order
/// (stable for equal timestamps).
pub fn training_sequence<'a, I>(config: &ModelConfig, records: I) -> Vec<StateVector>
where
    I: IntoIterator<Item = &'a AisRecord>,
{
    let mut own: Vec<&AisRecord> = records
        .into_iter()
        .filter(|r| r.ship_type == config.ship_type)
        .collect();
    own.sort_by_key(|r| r.timestamp);
    own.into_iter().map(|r| r.state).collect()
}

/// Trains a fresh model on every matching record, sequentially.
pub fn train_central<'a, I>(config: ModelConfig, records: I) -> M3Model
where
    I: IntoIterator<Item = &'a AisRecord>,
{
    let mut model = M3Model::empty(config);
    model.train(&training_sequence(&config, records));
    model
}

/// Trains one fresh model per round and folds them with the same recurrence
/// the federation server uses: `global = aggregate([global, local])`.
pub fn train_chunked(config: ModelConfig, plan: &RoundPlan, records: &[AisRecord]) -> Result<M3Model, ModelError> {
    let mut global = M3Model::empty(config);
    for chunk in plan.partition(records) {
        let local = train_central(config, chunk);
        global = aggregate(&[&global, &local])?;
    }
    Ok(global)
}
