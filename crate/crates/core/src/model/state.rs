use super::ModelError;

/// Number of state-vector dimensions: lon, lat, sog, cog.
pub const STATE_DIMS: usize = 4;

pub const LON: usize = 0;
pub const LAT: usize = 1;
pub const SOG: usize = 2;
pub const COG: usize = 3;

/// Motion state of one AIS record: position in degrees, speed over ground in
/// knots and course over ground in degrees clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub lon: f64,
    pub lat: f64,
    pub sog: f64,
    pub cog: f64,
}

impl StateVector {
    /// Validated constructor. A course of exactly 360 is folded to 0.
    pub fn new(lon: f64, lat: f64, sog: f64, cog: f64) -> Result<Self, ModelError> {
        let cog = if cog == 360.0 { 0.0 } else { cog };
        let ok = (-180.0..=180.0).contains(&lon)
            && (-90.0..=90.0).contains(&lat)
            && sog >= 0.0
            && sog.is_finite()
            && (0.0..360.0).contains(&cog);
        if !ok {
            return Err(ModelError::InvalidState { lon, lat, sog, cog });
        }
        Ok(Self { lon, lat, sog, cog })
    }

    pub fn to_array(self) -> [f64; STATE_DIMS] {
        [self.lon, self.lat, self.sog, self.cog]
    }

    pub fn from_array(v: [f64; STATE_DIMS]) -> Self {
        Self {
            lon: v[LON],
            lat: v[LAT],
            sog: v[SOG],
            cog: v[COG],
        }
    }
}

/// Maps an angle difference into [-180, 180).
pub fn wrap_degrees(d: f64) -> f64 {
    let w = (d + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Maps a course into [0, 360).
pub fn normalize_course(c: f64) -> f64 {
    let r = c.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Per-dimension deviation `x - mu`, with the course dimension wrapped.
pub fn deviation(x: &[f64; STATE_DIMS], mu: &[f64; STATE_DIMS]) -> [f64; STATE_DIMS] {
    let mut d = [0.0; STATE_DIMS];
    for j in 0..STATE_DIMS {
        d[j] = x[j] - mu[j];
    }
    d[COG] = wrap_degrees(d[COG]);
    d
}
