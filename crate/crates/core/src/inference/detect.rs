use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{classify, score, DetectionThresholds, ScoreReport, Verdict};
use crate::ingestion::{AisRecord, RowRejection};
use crate::model::{M3Model, ShipType};

/// Frozen models keyed by ship type.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    models: BTreeMap<ShipType, M3Model>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(model: M3Model) -> Self {
        let mut s = Self::new();
        s.insert(model);
        s
    }

    pub fn insert(&mut self, model: M3Model) -> Option<M3Model> {
        self.models.insert(model.config().ship_type, model)
    }

    pub fn get(&self, ship_type: ShipType) -> Option<&M3Model> {
        self.models.get(&ship_type)
    }

    pub fn iter(&self) -> impl Iterator<Item = &M3Model> {
        self.models.values()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// A scored input record.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRecord {
    pub record: AisRecord,
    pub verdict: Verdict,
    pub report: ScoreReport,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetectStats {
    pub scored: u64,
    pub skipped_other_type: u64,
    pub row_errors: u64,
    pub normal: u64,
    pub position: u64,
    pub speed: u64,
    pub direction: u64,
}

impl DetectStats {
    pub fn anomalies(&self) -> u64 {
        self.position + self.speed + self.direction
    }

    fn count(&mut self, v: Verdict) {
        match v {
            Verdict::Normal => self.normal += 1,
            Verdict::Position => self.position += 1,
            Verdict::Speed => self.speed += 1,
            Verdict::Direction => self.direction += 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Detection {
    /// Every scored record, in input order.
    pub records: Vec<AnomalyRecord>,
    pub stats: DetectStats,
}

/// Scores and classifies every record whose ship type has a model.
///
/// Rejected input rows and records without a model are counted and skipped.
/// Scoring runs in parallel; output order follows input order.
pub fn detect_batch<I>(models: &ModelSet, records: I, th: &DetectionThresholds) -> Detection
where
    I: IntoIterator<Item = Result<AisRecord, RowRejection>>,
{
    let mut stats = DetectStats::default();
    let mut todo = Vec::new();
    for outcome in records {
        match outcome {
            Err(_) => stats.row_errors += 1,
            Ok(r) if models.get(r.ship_type).is_none() => stats.skipped_other_type += 1,
            Ok(r) => todo.push(r),
        }
    }
    let scored: Vec<AnomalyRecord> = todo
        .into_par_iter()
        .map(|record| {
            let model = models.get(record.ship_type).expect("filtered above");
            let report = score(model, &record.state);
            let verdict = classify(&report, th);
            AnomalyRecord {
                record,
                verdict,
                report,
            }
        })
        .collect();
    for a in &scored {
        stats.scored += 1;
        stats.count(a.verdict);
    }
    Detection {
        records: scored,
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GridConfig, ModelConfig, StateVector};
    use chrono::{TimeZone, Utc};

    fn rec(i: u32, t: ShipType, lon: f64) -> AisRecord {
        AisRecord {
            mmsi: 100 + i,
            timestamp: Utc.with_ymd_and_hms(2018, 7, 1, 0, 0, 0).unwrap() + chrono::Duration::seconds(i as i64),
            state: StateVector::new(lon, 57.005, 10.0, 45.0).unwrap(),
            ship_type: t,
        }
    }

    #[test]
    fn empty_stream() {
        let cfg = ModelConfig::with_defaults(GridConfig::default(), ShipType::Cargo);
        let d = detect_batch(&ModelSet::single(M3Model::empty(cfg)), Vec::new(), &Default::default());
        assert!(d.records.is_empty());
        assert_eq!(d.stats, DetectStats::default());
    }

    #[test]
    fn records_at_means_are_normal_and_order_kept() {
        let cfg = ModelConfig::with_defaults(GridConfig::default(), ShipType::Cargo);
        let mut m = M3Model::empty(cfg);
        let train: Vec<_> = (0..20).map(|i| rec(i, ShipType::Cargo, 11.001 + 0.05 * i as f64)).collect();
        for r in &train {
            m.update(&r.state);
        }
        let mut input: Vec<Result<AisRecord, RowRejection>> = train.iter().cloned().map(Ok).collect();
        input.insert(3, Ok(rec(99, ShipType::Tanker, 11.0)));
        input.insert(
            5,
            Err(RowRejection {
                line: 9,
                reason: crate::ingestion::DropReason::MissingField("SOG"),
            }),
        );
        let d = detect_batch(&ModelSet::single(m), input, &Default::default());
        assert_eq!(d.stats.scored, 20);
        assert_eq!(d.stats.skipped_other_type, 1);
        assert_eq!(d.stats.row_errors, 1);
        assert_eq!(d.stats.normal, 20);
        let mmsis: Vec<u32> = d.records.iter().map(|a| a.record.mmsi).collect();
        assert_eq!(mmsis, (100..120).collect::<Vec<_>>());
    }

    #[test]
    fn empty_model_flags_position() {
        let cfg = ModelConfig::with_defaults(GridConfig::default(), ShipType::Cargo);
        let input = (0..5).map(|i| Ok(rec(i, ShipType::Cargo, 11.0 + i as f64 * 0.1)));
        let d = detect_batch(&ModelSet::single(M3Model::empty(cfg)), input, &Default::default());
        assert_eq!(d.stats.position, 5);
        assert!(d.records.iter().all(|a| a.verdict == Verdict::Position));
    }
}
