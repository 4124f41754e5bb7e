//! Anomaly events: per-vessel runs of anomalous records, their durations,
//! and comparisons between the outputs of two models.

mod compare;

use std::io::Write;

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

use crate::inference::{AnomalyRow, Verdict};

pub use compare::{
    compare_models, compare_outputs, confusion_report, event_overlaps, ConfusionCounts, EventOverlap, OverlapReport,
    VerdictCounts,
};

pub const DEFAULT_MAX_GAP_S: i64 = 60;
pub const SHORT_EVENT_S: i64 = 60;
pub const LONG_EVENT_S: i64 = 600;

pub const EVENT_CSV_HEADER: [&str; 6] = ["mmsi", "start", "end", "duration_s", "n_records", "main_type"];

#[derive(Debug, Error)]
pub enum EventsError {
    #[error("flag index {index} outside the {total}-record universe")]
    OutOfUniverse { index: usize, total: usize },
    #[error("anomaly outputs differ: {0}")]
    Mismatch(String),
    #[error("event csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("event output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyEvent {
    pub mmsi: u32,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    /// Time-ordered, all anomalous, all from `mmsi`.
    pub records: Vec<AnomalyRow>,
    pub main_type: Verdict,
}

impl AnomalyEvent {
    pub fn duration(&self) -> Duration {
        self.end - self.start
    }

    pub fn duration_s(&self) -> i64 {
        self.duration().num_seconds()
    }
}

/// Modal verdict; ties go to position, then direction, then speed.
fn main_type(records: &[AnomalyRow]) -> Verdict {
    let count = |v: Verdict| records.iter().filter(|r| r.verdict == v).count();
    let (p, d, s) = (count(Verdict::Position), count(Verdict::Direction), count(Verdict::Speed));
    if p >= d && p >= s {
        Verdict::Position
    } else if d >= s {
        Verdict::Direction
    } else {
        Verdict::Speed
    }
}

/// Groups anomalous rows into maximal per-vessel runs whose consecutive
/// gaps are at most `max_gap`. Normal rows are ignored; they neither join
/// nor split events.
pub fn group_events(rows: &[AnomalyRow], max_gap: Duration) -> Vec<AnomalyEvent> {
    let mut anomalies: Vec<&AnomalyRow> = rows.iter().filter(|r| r.verdict.is_anomaly()).collect();
    anomalies.sort_by_key(|r| (r.mmsi, r.timestamp));

    let mut events = Vec::new();
    let mut run: Vec<AnomalyRow> = Vec::new();
    let flush = |run: &mut Vec<AnomalyRow>, events: &mut Vec<AnomalyEvent>| {
        if let (Some(first), Some(last)) = (run.first(), run.last()) {
            events.push(AnomalyEvent {
                mmsi: first.mmsi,
                start: first.timestamp,
                end: last.timestamp,
                main_type: main_type(run),
                records: std::mem::take(run),
            });
        }
    };
    for r in anomalies {
        let joins = run
            .last()
            .is_some_and(|prev| prev.mmsi == r.mmsi && r.timestamp - prev.timestamp <= max_gap);
        if !joins {
            flush(&mut run, &mut events);
        }
        run.push(r.clone());
    }
    flush(&mut run, &mut events);
    events
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationHistogram {
    pub total: usize,
    /// Shorter than 60 s.
    pub short: usize,
    /// 60 s to 600 s inclusive.
    pub medium: usize,
    /// Longer than 600 s.
    pub long: usize,
    /// `(q, seconds)` pairs, nearest-rank.
    pub quantiles: Vec<(f64, i64)>,
}

impl DurationHistogram {
    fn fraction(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            n as f64 / self.total as f64
        }
    }

    pub fn short_fraction(&self) -> f64 {
        self.fraction(self.short)
    }

    pub fn medium_fraction(&self) -> f64 {
        self.fraction(self.medium)
    }

    pub fn long_fraction(&self) -> f64 {
        self.fraction(self.long)
    }
}

const QUANTILES: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];

pub fn event_stats(events: &[AnomalyEvent]) -> DurationHistogram {
    let mut durations: Vec<i64> = events.iter().map(AnomalyEvent::duration_s).collect();
    durations.sort_unstable();
    let n = durations.len();
    let quantiles = if n == 0 {
        Vec::new()
    } else {
        QUANTILES
            .iter()
            .map(|&q| {
                let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
                (q, durations[rank - 1])
            })
            .collect()
    };
    DurationHistogram {
        total: n,
        short: durations.iter().filter(|&&d| d < SHORT_EVENT_S).count(),
        medium: durations.iter().filter(|&&d| (SHORT_EVENT_S..=LONG_EVENT_S).contains(&d)).count(),
        long: durations.iter().filter(|&&d| d > LONG_EVENT_S).count(),
        quantiles,
    }
}

pub fn write_events_csv<W: Write>(sink: W, events: &[AnomalyEvent]) -> Result<(), EventsError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(EVENT_CSV_HEADER)?;
    for e in events {
        w.write_record([
            e.mmsi.to_string(),
            e.start.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            e.end.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            e.duration_s().to_string(),
            e.records.len().to_string(),
            e.main_type.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_histogram(h: &DurationHistogram) -> String {
    let pct = |f: f64| 100.0 * f;
    let mut s = format!(
        "events: {}\n  < 60 s:        {:>8} ({:.1}%)\n  60 s - 10 min: {:>8} ({:.1}%)\n  > 10 min:      {:>8} ({:.1}%)\n",
        h.total,
        h.short,
        pct(h.short_fraction()),
        h.medium,
        pct(h.medium_fraction()),
        h.long,
        pct(h.long_fraction()),
    );
    for (q, d) in &h.quantiles {
        s.push_str(&format!("  q{:<4} {d} s\n", q));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    pub(crate) fn row(mmsi: u32, t: i64, verdict: Verdict) -> AnomalyRow {
        AnomalyRow {
            mmsi,
            timestamp: Utc.with_ymd_and_hms(2018, 7, 1, 0, 0, 0).unwrap() + Duration::seconds(t),
            lon: 11.9,
            lat: 57.7,
            sog: 10.0,
            cog: 90.0,
            verdict,
            p_value: None,
            per_dim_p: None,
        }
    }

    fn spans(events: &[AnomalyEvent]) -> Vec<(u32, i64, usize)> {
        events.iter().map(|e| (e.mmsi, e.duration_s(), e.records.len())).collect()
    }

    #[test]
    fn gap_over_a_minute_splits() {
        let rows = [
            row(1, 0, Verdict::Speed),
            row(1, 30, Verdict::Speed),
            row(1, 120, Verdict::Position),
        ];
        let ev = group_events(&rows, Duration::seconds(60));
        assert_eq!(spans(&ev), vec![(1, 30, 2), (1, 0, 1)]);
    }

    #[test]
    fn exactly_sixty_seconds_joins() {
        let rows = [row(1, 0, Verdict::Speed), row(1, 60, Verdict::Speed)];
        assert_eq!(group_events(&rows, Duration::seconds(60)).len(), 1);
    }

    #[test]
    fn empty_input() {
        assert!(group_events(&[], Duration::seconds(60)).is_empty());
    }

    #[test]
    fn vessels_never_mix() {
        let rows: Vec<_> = (0..10).map(|i| row(1 + (i % 2) as u32, i * 10, Verdict::Direction)).collect();
        let ev = group_events(&rows, Duration::seconds(60));
        assert_eq!(spans(&ev), vec![(1, 80, 5), (2, 80, 5)]);
    }

    #[test]
    fn normal_rows_neither_join_nor_split() {
        let rows = [
            row(1, 0, Verdict::Speed),
            row(1, 20, Verdict::Normal),
            row(1, 50, Verdict::Speed),
        ];
        let ev = group_events(&rows, Duration::seconds(60));
        assert_eq!(spans(&ev), vec![(1, 50, 2)]);
    }

    #[test]
    fn main_type_ties() {
        let rows = [row(1, 0, Verdict::Speed), row(1, 1, Verdict::Direction)];
        assert_eq!(group_events(&rows, Duration::seconds(60))[0].main_type, Verdict::Direction);
        let rows = [row(1, 0, Verdict::Speed), row(1, 1, Verdict::Position)];
        assert_eq!(group_events(&rows, Duration::seconds(60))[0].main_type, Verdict::Position);
        let rows = [row(1, 0, Verdict::Speed), row(1, 1, Verdict::Speed), row(1, 2, Verdict::Position)];
        assert_eq!(group_events(&rows, Duration::seconds(60))[0].main_type, Verdict::Speed);
    }

    #[test]
    fn histogram_buckets() {
        let rows = [
            row(1, 0, Verdict::Speed),
            row(2, 0, Verdict::Speed),
            row(2, 30, Verdict::Speed),
            row(3, 0, Verdict::Speed),
        ];
        let mut ev = group_events(&rows, Duration::seconds(60));
        ev[2].end = ev[2].start + Duration::seconds(700);
        let h = event_stats(&ev);
        assert_eq!((h.short, h.medium, h.long), (2, 0, 1));
        assert_eq!(h.quantiles.first(), Some(&(0.0, 0)));
        assert_eq!(h.quantiles.last(), Some(&(1.0, 700)));
    }

    #[test]
    fn all_zero_duration_is_all_short() {
        let rows: Vec<_> = (0..5).map(|i| row(i, 0, Verdict::Position)).collect();
        let h = event_stats(&group_events(&rows, Duration::seconds(60)));
        assert_eq!(h.short_fraction(), 1.0);
        assert_eq!(event_stats(&[]).short_fraction(), 0.0);
    }

    #[test]
    fn reference_duration_shares() {
        // published event counts: baseline 15,933 events (10,009 short, 160 long),
        // federated 12,156 events (6,966 short, 161 long)
        let share = |a: f64, b: f64| (100.0 * a / b).round();
        assert_eq!(share(10009.0, 15933.0), 63.0);
        assert_eq!(share(160.0, 15933.0), 1.0);
        assert_eq!(share(6966.0, 12156.0), 57.0);
        assert_eq!(share(161.0, 12156.0), 1.0);
    }

    #[test]
    fn event_csv_layout() {
        let rows = [row(7, 0, Verdict::Speed), row(7, 45, Verdict::Speed)];
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &group_events(&rows, Duration::seconds(60))).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "mmsi,start,end,duration_s,n_records,main_type\n7,2018-07-01T00:00:00Z,2018-07-01T00:00:45Z,45,2,speed\n"
        );
    }
}
