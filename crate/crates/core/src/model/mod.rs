//! Grid-based Gaussian-mixture movement model.
//!
//! Geographic space is split into a regular lon/lat grid. Every cell holds up
//! to `max_prototypes` Gaussian components ("prototypes") over the motion
//! state `(lon, lat, sog, cog)`. Prototypes keep running first and second
//! moments, so single-record updates, pairwise merges and whole-model
//! aggregation all reduce to exact moment pooling.

mod cell;
mod codec;
mod m3;
mod prototype;
mod state;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use cell::{Cell, CellIndex};
pub use codec::{DecodeError, CELL_RECORD_LEN, HEADER_LEN, MAGIC, PROTOTYPE_RECORD_LEN, VERSION};
pub use m3::{aggregate, M3Model};
pub use prototype::Prototype;
pub use state::{
    deviation, normalize_course, wrap_degrees, StateVector, COG, LAT, LON, SOG, STATE_DIMS,
};

/// Diagonal regularization added to normalized covariances before inversion.
pub const COVARIANCE_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid state vector (lon {lon}, lat {lat}, sog {sog}, cog {cog})")]
    InvalidState { lon: f64, lat: f64, sog: f64, cog: f64 },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("model configuration mismatch: {0}")]
    ConfigMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShipType {
    Cargo,
    Tanker,
    Passenger,
}

impl ShipType {
    pub const ALL: [ShipType; 3] = [ShipType::Cargo, ShipType::Tanker, ShipType::Passenger];

    pub fn code(self) -> u8 {
        match self {
            ShipType::Cargo => 0,
            ShipType::Tanker => 1,
            ShipType::Passenger => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ShipType::Cargo),
            1 => Some(ShipType::Tanker),
            2 => Some(ShipType::Passenger),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ShipType::Cargo => "cargo",
            ShipType::Tanker => "tanker",
            ShipType::Passenger => "passenger",
        }
    }
}

impl fmt::Display for ShipType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShipType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cargo" => Ok(ShipType::Cargo),
            "tanker" => Ok(ShipType::Tanker),
            "passenger" => Ok(ShipType::Passenger),
            other => Err(format!("unknown ship type {other:?}")),
        }
    }
}

/// Regular lon/lat grid. Both axes use the same cell size in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub cell_size: f64,
}

impl GridConfig {
    pub fn new(origin_lon: f64, origin_lat: f64, cell_size: f64) -> Result<Self, ModelError> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        if !origin_lon.is_finite() || !origin_lat.is_finite() {
            return Err(ModelError::InvalidConfig("grid origin must be finite".into()));
        }
        Ok(Self {
            origin_lon,
            origin_lat,
            cell_size,
        })
    }

    /// Grid cell containing `x`: `floor((lat - origin_lat) / cell_size)` rows,
    /// `floor((lon - origin_lon) / cell_size)` columns.
    pub fn cell_index(&self, x: &StateVector) -> CellIndex {
        let row = ((x.lat - self.origin_lat) / self.cell_size).floor();
        let col = ((x.lon - self.origin_lon) / self.cell_size).floor();
        CellIndex::new(row as i32, col as i32)
    }

    /// South-west corner of a cell, `(lon, lat)`.
    pub fn cell_origin(&self, index: CellIndex) -> (f64, f64) {
        (
            self.origin_lon + index.col as f64 * self.cell_size,
            self.origin_lat + index.row as f64 * self.cell_size,
        )
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            origin_lon: 0.0,
            origin_lat: 0.0,
            cell_size: 0.01,
        }
    }
}

/// Per-dimension divisors that turn raw state deviations into the unitless
/// space used by [`Scales::distance`] and by the fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales(pub [f64; STATE_DIMS]);

impl Scales {
    pub const DEFAULT_SOG: f64 = 2.0;
    pub const DEFAULT_COG: f64 = 30.0;

    /// Defaults: one cell per position unit, 2 knots, 30 degrees.
    pub fn for_grid(grid: &GridConfig) -> Self {
        Scales([
            grid.cell_size,
            grid.cell_size,
            Self::DEFAULT_SOG,
            Self::DEFAULT_COG,
        ])
    }

    /// Scaled deviation `x - mu` with the course wrapped.
    pub fn normalized_deviation(
        &self,
        x: &[f64; STATE_DIMS],
        mu: &[f64; STATE_DIMS],
    ) -> [f64; STATE_DIMS] {
        let mut d = deviation(x, mu);
        for (dj, s) in d.iter_mut().zip(self.0.iter()) {
            *dj /= s;
        }
        d
    }

    /// Euclidean norm of the scaled, course-wrapped deviation.
    pub fn distance(&self, x: &[f64; STATE_DIMS], mu: &[f64; STATE_DIMS]) -> f64 {
        self.normalized_deviation(x, mu)
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Maximum prototypes per cell.
    pub max_prototypes: u32,
    /// A record closer than this (normalized units) to its nearest prototype
    /// is absorbed into it; otherwise it seeds a new prototype.
    pub new_prototype_distance: f64,
    pub scales: Scales,
}

impl Hyperparams {
    pub const DEFAULT_MAX_PROTOTYPES: u32 = 8;
    pub const DEFAULT_NEW_PROTOTYPE_DISTANCE: f64 = 1.0;

    pub fn for_grid(grid: &GridConfig) -> Self {
        Self {
            max_prototypes: Self::DEFAULT_MAX_PROTOTYPES,
            new_prototype_distance: Self::DEFAULT_NEW_PROTOTYPE_DISTANCE,
            scales: Scales::for_grid(grid),
        }
    }
}

/// Everything two models must agree on before they can be aggregated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub grid: GridConfig,
    pub ship_type: ShipType,
    pub hyper: Hyperparams,
}

impl ModelConfig {
    pub fn new(grid: GridConfig, ship_type: ShipType, hyper: Hyperparams) -> Result<Self, ModelError> {
        let cfg = Self {
            grid,
            ship_type,
            hyper,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default hyperparameters on the given grid.
    pub fn with_defaults(grid: GridConfig, ship_type: ShipType) -> Self {
        Self {
            grid,
            ship_type,
            hyper: Hyperparams::for_grid(&grid),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        GridConfig::new(self.grid.origin_lon, self.grid.origin_lat, self.grid.cell_size)?;
        let p = self.hyper.max_prototypes;
        if p == 0 || p > u16::MAX as u32 {
            return Err(ModelError::InvalidConfig(format!(
                "max_prototypes must be in 1..={}, got {p}",
                u16::MAX
            )));
        }
        let d = self.hyper.new_prototype_distance;
        if d.is_nan() || d < 0.0 {
            return Err(ModelError::InvalidConfig(format!(
                "new_prototype_distance must be non-negative, got {d}"
            )));
        }
        if self.hyper.scales.0.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(ModelError::InvalidConfig(
                "dimension scales must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn ensure_matches(&self, other: &ModelConfig) -> Result<(), ModelError> {
        if self.ship_type != other.ship_type {
            return Err(ModelError::ConfigMismatch(format!(
                "ship type {} vs {}",
                self.ship_type, other.ship_type
            )));
        }
        if self.grid != other.grid {
            return Err(ModelError::ConfigMismatch(format!(
                "grid {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        if self.hyper != other.hyper {
            return Err(ModelError::ConfigMismatch(format!(
                "hyperparameters {:?} vs {:?}",
                self.hyper, other.hyper
            )));
        }
        Ok(())
    }
}
