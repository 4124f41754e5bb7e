use super::{AisRecord, IngestError};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Circular coverage area of a (fictitious) receiving antenna.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaSpec {
    pub center_lon: f64,
    pub center_lat: f64,
    pub radius_m: f64,
}

impl AntennaSpec {
    pub fn new(center_lon: f64, center_lat: f64, radius_m: f64) -> Result<Self, IngestError> {
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(IngestError::InvalidAntenna(format!("radius must be positive, got {radius_m}")));
        }
        if !(-180.0..=180.0).contains(&center_lon) || !(-90.0..=90.0).contains(&center_lat) {
            return Err(IngestError::InvalidAntenna(format!(
                "center ({center_lon}, {center_lat}) out of range"
            )));
        }
        Ok(Self {
            center_lon,
            center_lat,
            radius_m,
        })
    }

    pub fn covers(&self, lon: f64, lat: f64) -> bool {
        haversine_m((lon, lat), (self.center_lon, self.center_lat)) <= self.radius_m
    }
}

/// The three Gothenburg-area antennas with 13 km coverage radius.
pub fn default_antennas() -> Vec<AntennaSpec> {
    [(11.96524, 57.70730), (11.63979, 57.71941), (11.78460, 57.57255)]
        .into_iter()
        .map(|(lon, lat)| AntennaSpec {
            center_lon: lon,
            center_lat: lat,
            radius_m: 13_000.0,
        })
        .collect()
}

/// Great-circle distance in metres between two `(lon, lat)` points.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lon1, lat1) = (a.0.to_radians(), a.1.to_radians());
    let (lon2, lat2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageStats {
    pub input: u64,
    /// Records inside at least one coverage area.
    pub unique_assigned: u64,
    /// Records inside more than one coverage area.
    pub multi_assigned: u64,
    /// Records outside every coverage area.
    pub dropped: u64,
    pub per_antenna: Vec<u64>,
}

impl CoverageStats {
    /// Fraction of covered records that went to more than one antenna.
    pub fn overlap_fraction(&self) -> f64 {
        if self.unique_assigned == 0 {
            0.0
        } else {
            self.multi_assigned as f64 / self.unique_assigned as f64
        }
    }

    pub fn duplicated_total(&self) -> u64 {
        self.per_antenna.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Assignment {
    pub per_antenna: Vec<Vec<AisRecord>>,
    pub stats: CoverageStats,
}

/// Sends every record to each antenna whose circle contains it. Input order
/// is preserved within each antenna's stream.
pub fn assign_to_antennas(records: &[AisRecord], antennas: &[AntennaSpec]) -> Result<Assignment, IngestError> {
    if antennas.is_empty() {
        return Err(IngestError::InvalidAntenna("at least one antenna is required".into()));
    }
    let mut per_antenna = vec![Vec::new(); antennas.len()];
    let mut stats = CoverageStats {
        per_antenna: vec![0; antennas.len()],
        ..Default::default()
    };
    for r in records {
        stats.input += 1;
        let mut hits = 0;
        for (i, a) in antennas.iter().enumerate() {
            if a.covers(r.state.lon, r.state.lat) {
                per_antenna[i].push(r.clone());
                stats.per_antenna[i] += 1;
                hits += 1;
            }
        }
        match hits {
            0 => stats.dropped += 1,
            1 => stats.unique_assigned += 1,
            _ => {
                stats.unique_assigned += 1;
                stats.multi_assigned += 1;
            }
        }
    }
    Ok(Assignment { per_antenna, stats })
}

/// Records inside at least one coverage area, each kept once.
pub fn coverage_filter(records: &[AisRecord], antennas: &[AntennaSpec]) -> Vec<AisRecord> {
    records
        .iter()
        .filter(|r| antennas.iter().any(|a| a.covers(r.state.lon, r.state.lat)))
        .cloned()
        .collect()
}
