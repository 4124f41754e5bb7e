//! Run configuration: a flat TOML file whose keys can each be overridden by
//! a command-line flag. Precedence is flag, then file, then built-in default.
//!
//! ```toml
//! cell_size = 0.01
//! max_prototypes = 8
//! new_prototype_distance = 1.0
//! scale_sog = 2.0
//! threshold_pos = 0.01
//! antennas = [[11.96524, 57.70730, 13000.0], [11.63979, 57.71941, 13000.0]]
//! days_per_round = 1
//! return_global = false
//! listen = "127.0.0.1:7878"
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use m3fed_core::events::DEFAULT_MAX_GAP_S;
use m3fed_core::inference::DetectionThresholds;
use m3fed_core::ingestion::{default_antennas, AntennaSpec};
use m3fed_core::model::{GridConfig, Hyperparams, ModelConfig, Scales, ShipType};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";

/// Every configurable key. `None` means "not set at this level".
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Grid cell edge in degrees.
    #[arg(long)]
    pub cell_size: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub origin_lon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub origin_lat: Option<f64>,
    /// Prototype capacity P per cell.
    #[arg(long)]
    pub max_prototypes: Option<u32>,
    /// Scaled distance beyond which a record opens a new prototype.
    #[arg(long)]
    pub new_prototype_distance: Option<f64>,
    /// Distance scales; lon/lat default to the cell size.
    #[arg(long)]
    pub scale_lon: Option<f64>,
    #[arg(long)]
    pub scale_lat: Option<f64>,
    #[arg(long)]
    pub scale_sog: Option<f64>,
    #[arg(long)]
    pub scale_cog: Option<f64>,
    /// Significance levels of the position, speed and direction tests.
    #[arg(long)]
    pub threshold_pos: Option<f64>,
    #[arg(long)]
    pub threshold_sog: Option<f64>,
    #[arg(long)]
    pub threshold_cog: Option<f64>,
    /// Coverage circles as `[lon, lat, radius_m]`; file only.
    #[arg(skip)]
    pub antennas: Option<Vec<[f64; 3]>>,
    /// Keep only records inside some antenna's coverage.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub coverage_filter: Option<bool>,
    #[arg(long)]
    pub days_per_round: Option<u32>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub return_global: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub seed_from_global: Option<bool>,
    #[arg(long)]
    pub listen: Option<String>,
    /// Largest gap in seconds between records of one anomaly event.
    #[arg(long)]
    pub max_gap_s: Option<i64>,
}

macro_rules! overlay {
    ($top:expr, $base:expr; $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field),)* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// `self` wherever set, `base` elsewhere.
    pub fn over(self, base: RunConfig) -> RunConfig {
        overlay!(self, base;
            cell_size, origin_lon, origin_lat, max_prototypes, new_prototype_distance,
            scale_lon, scale_lat, scale_sog, scale_cog, threshold_pos, threshold_sog, threshold_cog,
            antennas, coverage_filter, days_per_round, return_global, seed_from_global, listen, max_gap_s)
    }

    pub fn resolve(&self) -> Result<Settings> {
        let d = GridConfig::default();
        let grid = GridConfig::new(
            self.origin_lon.unwrap_or(d.origin_lon),
            self.origin_lat.unwrap_or(d.origin_lat),
            self.cell_size.unwrap_or(d.cell_size),
        )?;
        let base = Hyperparams::for_grid(&grid);
        let s = Scales::for_grid(&grid).0;
        let hyper = Hyperparams {
            max_prototypes: self.max_prototypes.unwrap_or(base.max_prototypes),
            new_prototype_distance: self.new_prototype_distance.unwrap_or(base.new_prototype_distance),
            scales: Scales([
                self.scale_lon.unwrap_or(s[0]),
                self.scale_lat.unwrap_or(s[1]),
                self.scale_sog.unwrap_or(s[2]),
                self.scale_cog.unwrap_or(s[3]),
            ]),
        };
        // validates the hyperparameters once, independent of ship type
        ModelConfig::new(grid, ShipType::Cargo, hyper)?;

        let td = DetectionThresholds::default();
        let thresholds = DetectionThresholds::new(
            self.threshold_pos.unwrap_or(td.pos),
            self.threshold_sog.unwrap_or(td.sog),
            self.threshold_cog.unwrap_or(td.cog),
        )?;
        let antennas = match &self.antennas {
            None => default_antennas(),
            Some(list) => list
                .iter()
                .map(|&[lon, lat, r]| AntennaSpec::new(lon, lat, r))
                .collect::<Result<_, _>>()?,
        };
        if antennas.is_empty() {
            bail!("antennas must list at least one coverage circle");
        }
        let days_per_round = self.days_per_round.unwrap_or(1);
        if days_per_round == 0 {
            bail!("days_per_round must be at least 1");
        }
        let max_gap_s = self.max_gap_s.unwrap_or(DEFAULT_MAX_GAP_S);
        if max_gap_s < 0 {
            bail!("max_gap_s must be non-negative, got {max_gap_s}");
        }
        Ok(Settings {
            grid,
            hyper,
            thresholds,
            antennas,
            coverage_filter: self.coverage_filter.unwrap_or(true),
            days_per_round,
            return_global: self.return_global.unwrap_or(false),
            seed_from_global: self.seed_from_global.unwrap_or(false),
            listen: self.listen.clone().unwrap_or_else(|| DEFAULT_LISTEN.into()),
            max_gap_s,
        })
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub grid: GridConfig,
    pub hyper: Hyperparams,
    pub thresholds: DetectionThresholds,
    pub antennas: Vec<AntennaSpec>,
    pub coverage_filter: bool,
    pub days_per_round: u32,
    pub return_global: bool,
    pub seed_from_global: bool,
    pub listen: String,
    pub max_gap_s: i64,
}

impl Settings {
    pub fn model_config(&self, ship_type: ShipType) -> ModelConfig {
        ModelConfig::new(self.grid, ship_type, self.hyper).expect("validated in resolve")
    }
}
