//! Scoring unseen records against a trained model.
//!
//! A record is compared with the prototypes of its grid cell and the eight
//! neighbouring cells. With no prototype in reach it is a position anomaly.
//! Otherwise the closest prototype is used for a chi-squared goodness-of-fit
//! test on the squared Mahalanobis distance, and per-dimension z-scores decide
//! which kind of anomaly a bad fit is.

mod detect;
mod output;
mod stats;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

use crate::model::{CellIndex, M3Model, StateVector, COVARIANCE_EPSILON, STATE_DIMS};

pub use detect::{detect_batch, AnomalyRecord, DetectStats, Detection, ModelSet};
pub use output::{read_anomaly_csv, write_anomaly_csv, AnomalyRow, ANOMALY_CSV_HEADER};
pub use stats::{chi_squared_sf, two_sided_normal_p};

/// Degrees of freedom of the joint fit test (full state vector).
pub const JOINT_DOF: f64 = STATE_DIMS as f64;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("threshold {name} must be in (0, 1], got {value}")]
    InvalidThreshold { name: &'static str, value: f64 },
    #[error("unknown verdict {0:?}")]
    UnknownVerdict(String),
    #[error("anomaly csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("anomaly csv line {line}: {message}")]
    Row { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Significance levels for the position, speed and direction tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionThresholds {
    pub pos: f64,
    pub sog: f64,
    pub cog: f64,
}

impl DetectionThresholds {
    pub fn new(pos: f64, sog: f64, cog: f64) -> Result<Self, InferenceError> {
        for (name, value) in [("pos", pos), ("sog", sog), ("cog", cog)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(InferenceError::InvalidThreshold { name, value });
            }
        }
        Ok(Self { pos, sog, cog })
    }

    /// Level of the joint test: the strictest of the three.
    pub fn joint(&self) -> f64 {
        self.pos.min(self.sog).min(self.cog)
    }

    fn for_dim(&self, dim: usize) -> f64 {
        match dim {
            0 | 1 => self.pos,
            2 => self.sog,
            _ => self.cog,
        }
    }
}

impl Default for DetectionThresholds {
    fn default() -> Self {
        Self {
            pos: 0.01,
            sog: 0.01,
            cog: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Normal,
    Position,
    Speed,
    Direction,
}

impl Verdict {
    pub fn is_anomaly(self) -> bool {
        self != Verdict::Normal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Normal => "normal",
            Verdict::Position => "position",
            Verdict::Speed => "speed",
            Verdict::Direction => "direction",
        }
    }

    fn for_dim(dim: usize) -> Verdict {
        match dim {
            0 | 1 => Verdict::Position,
            2 => Verdict::Speed,
            _ => Verdict::Direction,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = InferenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Verdict::Normal),
            "position" => Ok(Verdict::Position),
            "speed" => Ok(Verdict::Speed),
            "direction" => Ok(Verdict::Direction),
            other => Err(InferenceError::UnknownVerdict(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrototypeRef {
    pub cell: CellIndex,
    pub index: usize,
}

/// Goodness of fit against the matched prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub prototype: PrototypeRef,
    pub mahalanobis_sq: f64,
    /// Chi-squared survival probability of `mahalanobis_sq`.
    pub p_value: f64,
    /// Two-sided normal p-value per dimension (lon, lat, sog, cog).
    pub per_dim_p: [f64; STATE_DIMS],
    pub per_dim_z: [f64; STATE_DIMS],
}

/// `fit` is `None` when no prototype exists in the 3x3 neighbourhood.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub fit: Option<Fit>,
}

impl ScoreReport {
    pub fn matched(&self) -> bool {
        self.fit.is_some()
    }
}

/// Scores `x` against the nearest prototype in its 3x3 cell neighbourhood.
pub fn score(model: &M3Model, x: &StateVector) -> ScoreReport {
    let scales = model.config().hyper.scales;
    let point = x.to_array();
    let home = model.config().grid.cell_index(x);

    let mut best: Option<(PrototypeRef, f64)> = None;
    for index in home.neighborhood() {
        let Some(cell) = model.cell(index) else { continue };
        if let Some((i, d)) = cell.nearest_prototype(&point, &scales) {
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((PrototypeRef { cell: index, index: i }, d));
            }
        }
    }
    let Some((prototype, _)) = best else {
        return ScoreReport { fit: None };
    };

    let proto = &model.cell(prototype.cell).expect("matched cell").prototypes[prototype.index];
    let delta = scales.normalized_deviation(&point, &proto.mean);
    let cov = proto.covariance();
    let s = &scales.0;
    let mut sigma = Matrix4::<f64>::zeros();
    for i in 0..STATE_DIMS {
        for j in 0..STATE_DIMS {
            sigma[(i, j)] = cov[i][j] / (s[i] * s[j]);
        }
        sigma[(i, i)] += COVARIANCE_EPSILON;
    }
    let dv = Vector4::from(delta);
    let mahalanobis_sq = match sigma.cholesky() {
        Some(chol) => dv.dot(&chol.solve(&dv)),
        // Only reachable through rounding on near-singular inputs: fall back
        // to the diagonal.
        None => (0..STATE_DIMS).map(|j| delta[j] * delta[j] / sigma[(j, j)]).sum(),
    }
    .max(0.0);

    let mut per_dim_z = [0.0; STATE_DIMS];
    let mut per_dim_p = [0.0; STATE_DIMS];
    for j in 0..STATE_DIMS {
        per_dim_z[j] = delta[j] / sigma[(j, j)].sqrt();
        per_dim_p[j] = two_sided_normal_p(per_dim_z[j]);
    }

    ScoreReport {
        fit: Some(Fit {
            prototype,
            mahalanobis_sq,
            p_value: chi_squared_sf(mahalanobis_sq, JOINT_DOF),
            per_dim_p,
            per_dim_z,
        }),
    }
}

/// Assigns the verdict for a score report.
///
/// Unmatched records are position anomalies. A matched record is normal when
/// the joint test passes at the smallest threshold and no dimension falls
/// below its own threshold. Otherwise the verdict is the group of the most
/// extreme failing dimension, or of the most extreme dimension overall when
/// only the joint test failed.
pub fn classify(report: &ScoreReport, th: &DetectionThresholds) -> Verdict {
    let Some(fit) = &report.fit else {
        return Verdict::Position;
    };
    let failing: Vec<usize> = (0..STATE_DIMS)
        .filter(|&j| fit.per_dim_p[j] < th.for_dim(j))
        .collect();
    if fit.p_value >= th.joint() && failing.is_empty() {
        return Verdict::Normal;
    }
    let candidates: Vec<usize> = if failing.is_empty() {
        (0..STATE_DIMS).collect()
    } else {
        failing
    };
    // Largest |z| is the smallest two-sided p, without underflow ties.
    let mut worst = candidates[0];
    for &j in &candidates[1..] {
        if fit.per_dim_z[j].abs() > fit.per_dim_z[worst].abs() {
            worst = j;
        }
    }
    Verdict::for_dim(worst)
}
