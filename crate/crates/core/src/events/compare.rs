use std::collections::{BTreeMap, BTreeSet};

use super::{AnomalyEvent, EventsError};
use crate::inference::{AnomalyRow, Verdict};

/// Record-level agreement of a candidate model with a baseline model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_neg: u64,
    pub false_pos: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_neg + self.false_pos + self.true_neg
    }

    pub fn baseline_anomalies(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    pub fn candidate_anomalies(&self) -> u64 {
        self.true_pos + self.false_pos
    }

    /// The same counts with baseline and candidate swapped.
    pub fn swapped(&self) -> Self {
        Self {
            false_neg: self.false_pos,
            false_pos: self.false_neg,
            ..*self
        }
    }
}

/// Compares two sets of flagged record indices over `0..total`.
pub fn compare_models<A, B>(baseline: A, candidate: B, total: usize) -> Result<ConfusionCounts, EventsError>
where
    A: IntoIterator<Item = usize>,
    B: IntoIterator<Item = usize>,
{
    let collect = |it: &mut dyn Iterator<Item = usize>| -> Result<BTreeSet<usize>, EventsError> {
        it.map(|index| {
            if index < total {
                Ok(index)
            } else {
                Err(EventsError::OutOfUniverse { index, total })
            }
        })
        .collect()
    };
    let b = collect(&mut baseline.into_iter())?;
    let c = collect(&mut candidate.into_iter())?;
    let tp = b.intersection(&c).count() as u64;
    let fneg = b.len() as u64 - tp;
    let fpos = c.len() as u64 - tp;
    Ok(ConfusionCounts {
        true_pos: tp,
        false_neg: fneg,
        false_pos: fpos,
        true_neg: total as u64 - tp - fneg - fpos,
    })
}

/// Compares two anomaly outputs scored on the same record sequence.
pub fn compare_outputs(baseline: &[AnomalyRow], candidate: &[AnomalyRow]) -> Result<ConfusionCounts, EventsError> {
    if baseline.len() != candidate.len() {
        return Err(EventsError::Mismatch(format!(
            "{} vs {} records",
            baseline.len(),
            candidate.len()
        )));
    }
    if let Some(i) = baseline
        .iter()
        .zip(candidate)
        .position(|(a, b)| a.mmsi != b.mmsi || a.timestamp != b.timestamp)
    {
        return Err(EventsError::Mismatch(format!("record {} differs in mmsi or timestamp", i + 1)));
    }
    let flags = |rows: &[AnomalyRow]| -> Vec<usize> {
        rows.iter()
            .enumerate()
            .filter(|(_, r)| r.verdict.is_anomaly())
            .map(|(i, _)| i)
            .collect()
    };
    compare_models(flags(baseline), flags(candidate), baseline.len())
}

/// Anomaly counts by type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerdictCounts {
    pub position: u64,
    pub speed: u64,
    pub direction: u64,
}

impl VerdictCounts {
    pub fn of(rows: &[AnomalyRow]) -> Self {
        let mut c = Self::default();
        for r in rows {
            match r.verdict {
                Verdict::Position => c.position += 1,
                Verdict::Speed => c.speed += 1,
                Verdict::Direction => c.direction += 1,
                Verdict::Normal => {}
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.position + self.speed + self.direction
    }
}

/// Plain-text confusion table (baseline rows, candidate columns) followed by
/// per-type anomaly counts of both models.
pub fn confusion_report(
    c: &ConfusionCounts,
    baseline: (&str, VerdictCounts),
    candidate: (&str, VerdictCounts),
) -> String {
    let total = c.total().max(1) as f64;
    let cell = |n: u64| format!("{n} ({:.1}%)", 100.0 * n as f64 / total);
    let (bn, bc) = baseline;
    let (cn, cc) = candidate;
    let mut s = String::new();
    s.push_str(&format!("{:<22}{:>24}{:>24}\n", format!("{bn} \\ {cn}"), "anomaly", "normal"));
    s.push_str(&format!("{:<22}{:>24}{:>24}\n", "anomaly", cell(c.true_pos), cell(c.false_neg)));
    s.push_str(&format!("{:<22}{:>24}{:>24}\n", "normal", cell(c.false_pos), cell(c.true_neg)));
    s.push_str(&format!("total records: {}\n\n", c.total()));
    s.push_str(&format!("{:<12}{:>12}{:>12}{:>12}{:>12}\n", "model", "position", "speed", "direction", "total"));
    for (name, v) in [(bn, bc), (cn, cc)] {
        s.push_str(&format!(
            "{:<12}{:>12}{:>12}{:>12}{:>12}\n",
            name,
            v.position,
            v.speed,
            v.direction,
            v.total()
        ));
    }
    s
}

/// A pair of same-vessel events whose closed time intervals intersect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventOverlap {
    pub mmsi: u32,
    pub a: usize,
    pub b: usize,
    pub overlap_s: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OverlapReport {
    pub overlaps: Vec<EventOverlap>,
    /// Events of `a` intersecting at least one event of `b`.
    pub a_matched: usize,
    pub b_matched: usize,
    pub a_total: usize,
    pub b_total: usize,
}

/// Lists every intersecting (a, b) event pair; one event may overlap many.
pub fn event_overlaps(a: &[AnomalyEvent], b: &[AnomalyEvent]) -> OverlapReport {
    let mut by_vessel: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (j, e) in b.iter().enumerate() {
        by_vessel.entry(e.mmsi).or_default().push(j);
    }
    let mut overlaps = Vec::new();
    let mut b_hit = vec![false; b.len()];
    let mut a_matched = 0;
    for (i, ea) in a.iter().enumerate() {
        let mut hit = false;
        for &j in by_vessel.get(&ea.mmsi).map(Vec::as_slice).unwrap_or(&[]) {
            let eb = &b[j];
            let lo = ea.start.max(eb.start);
            let hi = ea.end.min(eb.end);
            if lo <= hi {
                overlaps.push(EventOverlap {
                    mmsi: ea.mmsi,
                    a: i,
                    b: j,
                    overlap_s: (hi - lo).num_seconds(),
                });
                b_hit[j] = true;
                hit = true;
            }
        }
        a_matched += usize::from(hit);
    }
    OverlapReport {
        overlaps,
        a_matched,
        b_matched: b_hit.iter().filter(|&&h| h).count(),
        a_total: a.len(),
        b_total: b.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::group_events;
    use chrono::{Duration, TimeZone, Utc};

    fn row(mmsi: u32, t: i64, verdict: Verdict) -> AnomalyRow {
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

    #[test]
    fn small_sets() {
        let c = compare_models([0, 1], [1, 2], 4).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                true_pos: 1,
                false_neg: 1,
                false_pos: 1,
                true_neg: 1
            }
        );
        let same = compare_models([0, 3], [3, 0], 4).unwrap();
        assert_eq!((same.false_neg, same.false_pos), (0, 0));
        assert!(matches!(
            compare_models([4], [], 4),
            Err(EventsError::OutOfUniverse { index: 4, total: 4 })
        ));
    }

    #[test]
    fn swap_symmetry() {
        let ab = compare_models([0, 1, 5], [1, 2], 8).unwrap();
        let ba = compare_models([1, 2], [0, 1, 5], 8).unwrap();
        assert_eq!(ab.swapped(), ba);
    }

    #[test]
    fn reference_confusion_sums() {
        // published July-2018 counts
        let c = ConfusionCounts {
            true_pos: 91_368,
            false_neg: 61_331,
            false_pos: 31_828,
            true_neg: 4_354_885,
        };
        assert_eq!(c.total(), 4_539_412);
        assert_eq!(c.baseline_anomalies(), 152_699);
        assert_eq!(c.candidate_anomalies(), 123_196);
    }

    #[test]
    fn outputs_compared_by_position() {
        let a = vec![row(1, 0, Verdict::Speed), row(1, 30, Verdict::Normal), row(2, 0, Verdict::Position)];
        let mut b = a.clone();
        b[0].verdict = Verdict::Normal;
        b[1].verdict = Verdict::Direction;
        let c = compare_outputs(&a, &b).unwrap();
        assert_eq!((c.true_pos, c.false_neg, c.false_pos, c.true_neg), (1, 1, 1, 0));
        assert_eq!(compare_outputs(&a, &a).unwrap().false_neg, 0);
        b[2].mmsi = 3;
        assert!(compare_outputs(&a, &b).is_err());
        assert!(compare_outputs(&a, &a[..2]).is_err());
    }

    #[test]
    fn overlap_pairs() {
        let gap = Duration::seconds(60);
        let a = group_events(
            &[row(1, 0, Verdict::Speed), row(1, 50, Verdict::Speed), row(1, 500, Verdict::Speed)],
            gap,
        );
        let b = group_events(&[row(1, 40, Verdict::Speed), row(2, 0, Verdict::Speed)], gap);
        let r = event_overlaps(&a, &b);
        assert_eq!(
            r.overlaps,
            vec![EventOverlap {
                mmsi: 1,
                a: 0,
                b: 0,
                overlap_s: 0
            }]
        );
        assert_eq!((r.a_matched, r.b_matched, r.a_total, r.b_total), (1, 1, 2, 2));
    }

    #[test]
    fn report_has_both_tables() {
        let c = compare_models([0, 1], [1, 2], 4).unwrap();
        let text = confusion_report(&c, ("M3", VerdictCounts::default()), ("M3fed", VerdictCounts::default()));
        assert!(text.contains("1 (25.0%)"));
        assert!(text.contains("total records: 4"));
        assert!(text.contains("M3fed"));
    }
}
