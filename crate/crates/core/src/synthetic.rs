//! Deterministic synthetic AIS traffic along fixed one-way lanes, with
//! optional injected anomalies and a ground-truth label sidecar.
//!
//! Each trip follows its lane's polyline at a per-vessel speed with a
//! per-vessel lateral offset, reporting every `report_interval_s` seconds
//! with Gaussian noise on every field. Every trip gets its own MMSI and
//! starts and ends on its day.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::inference::Verdict;
use crate::ingestion::{ship_type_label, AisRecord, IngestError, AIS_CSV_HEADER, AIS_TIMESTAMP_FORMAT};
use crate::model::{normalize_course, ShipType, StateVector};

const METERS_PER_DEG: f64 = 111_194.93;
const KNOT_MS: f64 = 1852.0 / 3600.0;
const FIRST_MMSI: u32 = 219_000_000;
const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub ship_type: ShipType,
    /// (lon, lat) polyline, travelled from first to last point.
    pub waypoints: Vec<(f64, f64)>,
    pub speed_kn: f64,
}

impl Lane {
    pub fn new(ship_type: ShipType, waypoints: Vec<(f64, f64)>, speed_kn: f64) -> Self {
        assert!(waypoints.len() >= 2, "a lane needs at least two waypoints");
        Self {
            ship_type,
            waypoints,
            speed_kn,
        }
    }
}

/// One lane per ship type through the waters covered by the default antennas.
pub fn gothenburg_lanes() -> Vec<Lane> {
    vec![
        Lane::new(
            ShipType::Cargo,
            vec![(11.58, 57.70), (11.72, 57.68), (11.90, 57.69), (12.02, 57.71)],
            12.0,
        ),
        Lane::new(
            ShipType::Tanker,
            vec![(11.70, 57.52), (11.80, 57.60), (11.88, 57.66), (11.97, 57.69)],
            10.0,
        ),
        Lane::new(
            ShipType::Passenger,
            vec![(11.62, 57.78), (11.78, 57.62), (11.80, 57.55)],
            18.0,
        ),
    ]
}

/// Three cargo lanes at least 0.2 degrees apart, so no grid cell (or cell
/// neighbourhood) is shared between them.
pub fn disjoint_cargo_lanes() -> Vec<Lane> {
    (0..3)
        .map(|i| {
            let lat = 57.30 + 0.25 * i as f64;
            Lane::new(ShipType::Cargo, vec![(11.40, lat), (11.70, lat + 0.03)], 12.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnomalyKind {
    /// Position shifted perpendicular to the lane.
    OffLane,
    /// Reported speed multiplied.
    SpeedSpike,
    /// Vessel turns around and retraces the lane.
    CourseReversal,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] = [AnomalyKind::OffLane, AnomalyKind::SpeedSpike, AnomalyKind::CourseReversal];

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::OffLane => "off_lane",
            AnomalyKind::SpeedSpike => "speed_spike",
            AnomalyKind::CourseReversal => "course_reversal",
        }
    }

    /// The verdict a detector should assign.
    pub fn expected_verdict(self) -> Verdict {
        match self {
            AnomalyKind::OffLane => Verdict::Position,
            AnomalyKind::SpeedSpike => Verdict::Speed,
            AnomalyKind::CourseReversal => Verdict::Direction,
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown anomaly kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AnomalyLabel {
    pub mmsi: u32,
    pub timestamp: DateTime<Utc>,
    pub kind: AnomalyKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub start: NaiveDate,
    pub days: u32,
    pub lanes: Vec<Lane>,
    pub trips_per_lane_per_day: u32,
    pub report_interval_s: u32,
    /// Standard deviation of position noise, degrees of latitude.
    pub position_noise_deg: f64,
    /// Standard deviation of each vessel's constant offset from the lane.
    pub lateral_spread_deg: f64,
    pub speed_spread_kn: f64,
    pub sog_noise_kn: f64,
    pub cog_noise_deg: f64,
    /// Probability that a trip carries one injected anomaly.
    pub anomaly_rate: f64,
    pub anomaly_len: u32,
    pub off_lane_offset_deg: f64,
    pub speed_spike_factor: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            start: NaiveDate::from_ymd_opt(2018, 7, 1).expect("valid date"),
            days: 1,
            lanes: gothenburg_lanes(),
            trips_per_lane_per_day: 10,
            report_interval_s: 30,
            position_noise_deg: 0.0003,
            lateral_spread_deg: 0.0005,
            speed_spread_kn: 0.5,
            sog_noise_kn: 0.5,
            cog_noise_deg: 3.0,
            anomaly_rate: 0.0,
            anomaly_len: 8,
            off_lane_offset_deg: 0.05,
            speed_spike_factor: 2.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyntheticData {
    /// Sorted by timestamp, then MMSI.
    pub records: Vec<AisRecord>,
    /// One label per injected anomalous record, sorted.
    pub labels: Vec<AnomalyLabel>,
}

/// Polyline in a local metric frame (east, north) in metres.
struct Track {
    lat0: f64,
    points: Vec<(f64, f64)>,
    /// Cumulative distance at each point.
    dist: Vec<f64>,
    origin: (f64, f64),
}

impl Track {
    fn new(waypoints: &[(f64, f64)]) -> Self {
        let lat0 = waypoints.iter().map(|p| p.1).sum::<f64>() / waypoints.len() as f64;
        let origin = waypoints[0];
        let kx = METERS_PER_DEG * lat0.to_radians().cos();
        let points: Vec<(f64, f64)> = waypoints
            .iter()
            .map(|&(lon, lat)| ((lon - origin.0) * kx, (lat - origin.1) * METERS_PER_DEG))
            .collect();
        let mut dist = vec![0.0];
        for w in points.windows(2) {
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            dist.push(dist.last().expect("non-empty") + d);
        }
        Self {
            lat0,
            points,
            dist,
            origin,
        }
    }

    fn length(&self) -> f64 {
        *self.dist.last().expect("non-empty")
    }

    /// Position (east, north) and bearing in degrees at arc length `s`.
    fn at(&self, s: f64) -> ((f64, f64), f64) {
        let s = s.clamp(0.0, self.length());
        let seg = (self.dist.partition_point(|&d| d <= s).max(1) - 1).min(self.points.len() - 2);
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let len = self.dist[seg + 1] - self.dist[seg];
        let f = if len > 0.0 { (s - self.dist[seg]) / len } else { 0.0 };
        let p = (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        let bearing = normalize_course((b.0 - a.0).atan2(b.1 - a.1).to_degrees());
        (p, bearing)
    }

    fn to_lon_lat(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let kx = METERS_PER_DEG * self.lat0.to_radians().cos();
        (self.origin.0 + x / kx, self.origin.1 + y / METERS_PER_DEG)
    }
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("finite positive sd").sample(rng)
    } else {
        0.0
    }
}

/// Generates `days` days of traffic. Identical configs give identical output.
pub fn generate(cfg: &SyntheticConfig) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tracks: Vec<Track> = cfg.lanes.iter().map(|l| Track::new(&l.waypoints)).collect();
    let dt = cfg.report_interval_s.max(1) as f64;
    let mut data = SyntheticData::default();
    let mut mmsi = FIRST_MMSI;

    for day in 0..cfg.days {
        let midnight = (cfg.start + chrono::Days::new(day as u64))
            .and_hms_opt(0, 0, 0)
            .expect("valid time")
            .and_utc();
        for (lane, track) in cfg.lanes.iter().zip(&tracks) {
            for _ in 0..cfg.trips_per_lane_per_day {
                mmsi += 1;
                let speed_kn = (lane.speed_kn + gauss(&mut rng, cfg.speed_spread_kn)).max(1.0);
                let v = speed_kn * KNOT_MS;
                let n = (track.length() / (v * dt)).floor() as usize + 1;
                let duration = ((n - 1) as f64 * dt) as i64;
                let latest_start = (SECONDS_PER_DAY - 1 - duration).max(0);
                let start = midnight + Duration::seconds(rng.random_range(0..=latest_start));
                let lateral = gauss(&mut rng, cfg.lateral_spread_deg);

                let len = cfg.anomaly_len as usize;
                let anomaly = if len > 0 && n >= 4 * len && rng.random_bool(cfg.anomaly_rate.clamp(0.0, 1.0)) {
                    let kind = AnomalyKind::ALL[rng.random_range(0..3)];
                    let first = rng.random_range(n / 4..=3 * n / 4 - len);
                    Some((kind, first..first + len))
                } else {
                    None
                };

                let mut s = 0.0;
                for i in 0..n {
                    let timestamp = start + Duration::seconds((i as f64 * dt) as i64);
                    let active = anomaly.as_ref().filter(|(_, w)| w.contains(&i)).map(|(k, _)| *k);
                    let ((x, y), bearing) = track.at(s);
                    let (mut lon, mut lat) = track.to_lon_lat((x, y));
                    let mut cog = bearing;
                    let mut sog = speed_kn;

                    // unit normal to the right of travel, in degrees
                    let right = (bearing + 90.0).to_radians();
                    let cos_lat = lat.to_radians().cos();
                    let mut offset = lateral;
                    if active == Some(AnomalyKind::OffLane) {
                        offset += cfg.off_lane_offset_deg;
                    }
                    lon += offset * right.sin() / cos_lat;
                    lat += offset * right.cos();
                    match active {
                        Some(AnomalyKind::SpeedSpike) => sog *= cfg.speed_spike_factor,
                        Some(AnomalyKind::CourseReversal) => cog += 180.0,
                        _ => {}
                    }

                    lon += gauss(&mut rng, cfg.position_noise_deg) / cos_lat;
                    lat += gauss(&mut rng, cfg.position_noise_deg);
                    sog = round_to((sog + gauss(&mut rng, cfg.sog_noise_kn)).max(0.0), 0.1);
                    cog = normalize_course(round_to(normalize_course(cog + gauss(&mut rng, cfg.cog_noise_deg)), 0.1));
                    let state = StateVector::new(round_to(lon, 1e-6), round_to(lat, 1e-6), sog, cog)
                        .expect("synthetic states are in range");
                    data.records.push(AisRecord {
                        mmsi,
                        timestamp,
                        state,
                        ship_type: lane.ship_type,
                    });
                    if let Some(kind) = active {
                        data.labels.push(AnomalyLabel { mmsi, timestamp, kind });
                    }

                    let step = v * dt;
                    s += if active == Some(AnomalyKind::CourseReversal) { -step } else { step };
                }
            }
        }
    }
    data.records.sort_by_key(|r| (r.timestamp, r.mmsi));
    data.labels.sort();
    data
}

const LABEL_HEADER: [&str; 3] = ["mmsi", "timestamp", "kind"];
const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn write_labels_csv<W: Write>(sink: W, labels: &[AnomalyLabel]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(LABEL_HEADER)?;
    for l in labels {
        w.write_record([
            l.mmsi.to_string(),
            l.timestamp.format(ISO_FORMAT).to_string(),
            l.kind.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv<R: Read>(source: R) -> Result<Vec<AnomalyLabel>, IngestError> {
    let mut r = csv::Reader::from_reader(source);
    if r.headers()?.iter().ne(LABEL_HEADER.iter().copied()) {
        return Err(IngestError::MissingColumn("kind"));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let bad = || IngestError::InvalidChunk(row.iter().collect::<Vec<_>>().join(","));
        out.push(AnomalyLabel {
            mmsi: row[0].parse().map_err(|_| bad())?,
            timestamp: NaiveDateTime::parse_from_str(&row[1], ISO_FORMAT)
                .map_err(|_| bad())?
                .and_utc(),
            kind: row[2].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Writes records as AISDK CSV with `dirty_rows` extra rows mixed in: rows of
/// a non-target ship type and rows lacking SOG, alternately. Readers must
/// drop all of them.
pub fn write_noisy_ais_csv<W: Write>(sink: W, records: &[AisRecord], dirty_rows: usize) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(AIS_CSV_HEADER)?;
    let every = records.len().checked_div(dirty_rows).map_or(usize::MAX, |n| n.max(1));
    let mut written_dirty = 0;
    for (i, r) in records.iter().enumerate() {
        let ts = r.timestamp.format(AIS_TIMESTAMP_FORMAT).to_string();
        let lat = r.state.lat.to_string();
        let lon = r.state.lon.to_string();
        let sog = r.state.sog.to_string();
        let cog = r.state.cog.to_string();
        w.write_record([&ts, &r.mmsi.to_string(), &lat, &lon, &sog, &cog, ship_type_label(r.ship_type)])?;
        if written_dirty < dirty_rows && i % every == every - 1 {
            if written_dirty % 2 == 0 {
                w.write_record([&ts, "111000001", &lat, &lon, &sog, &cog, "Fishing"])?;
            } else {
                w.write_record([&ts, "111000002", &lat, &lon, "", &cog, ship_type_label(r.ship_type)])?;
            }
            written_dirty += 1;
        }
    }
    w.flush()?;
    Ok(())
}
