use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{Days, NaiveDate};

use super::{AisRecord, IngestError};

/// Inclusive UTC date range naming one round's data, `YYYY-MM-DD/YYYY-MM-DD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkDescriptor {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl ChunkDescriptor {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        if end < start {
            return Err(IngestError::InvalidChunk(format!("{start}/{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn single_day(day: NaiveDate) -> Self {
        Self { start: day, end: day }
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start <= day && day <= self.end
    }
}

impl fmt::Display for ChunkDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.start.format("%Y-%m-%d"), self.end.format("%Y-%m-%d"))
    }
}

impl FromStr for ChunkDescriptor {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || IngestError::InvalidChunk(s.to_string());
        let (a, b) = s.split_once('/').ok_or_else(invalid)?;
        let start = NaiveDate::parse_from_str(a, "%Y-%m-%d").map_err(|_| invalid())?;
        let end = NaiveDate::parse_from_str(b, "%Y-%m-%d").map_err(|_| invalid())?;
        ChunkDescriptor::new(start, end)
    }
}

/// Ordered, disjoint date ranges; round `t` (1-based) trains on `rounds[t-1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    rounds: Vec<ChunkDescriptor>,
}

impl RoundPlan {
    pub fn new(rounds: Vec<ChunkDescriptor>) -> Result<Self, IngestError> {
        for w in rounds.windows(2) {
            if w[1].start <= w[0].end {
                return Err(IngestError::InvalidPlan(format!(
                    "round {} does not follow round {}",
                    w[1], w[0]
                )));
            }
        }
        Ok(Self { rounds })
    }

    /// `n_rounds` back-to-back windows of `days_per_round` days from `start`.
    pub fn consecutive(start: NaiveDate, n_rounds: u32, days_per_round: u32) -> Result<Self, IngestError> {
        if days_per_round == 0 {
            return Err(IngestError::InvalidPlan("days_per_round must be positive".into()));
        }
        let rounds = (0..n_rounds as u64)
            .map(|t| {
                let s = start
                    .checked_add_days(Days::new(t * days_per_round as u64))
                    .ok_or_else(|| IngestError::InvalidPlan("date overflow".into()))?;
                let e = s
                    .checked_add_days(Days::new(days_per_round as u64 - 1))
                    .ok_or_else(|| IngestError::InvalidPlan("date overflow".into()))?;
                Ok(ChunkDescriptor { start: s, end: e })
            })
            .collect::<Result<Vec<_>, IngestError>>()?;
        Self::new(rounds)
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[ChunkDescriptor] {
        &self.rounds
    }

    /// 0-based position of the round containing `day`.
    pub fn round_of(&self, day: NaiveDate) -> Option<usize> {
        let i = self.rounds.partition_point(|c| c.end < day);
        (i < self.rounds.len() && self.rounds[i].contains(day)).then_some(i)
    }

    /// Splits records by round, preserving input order inside each round.
    pub fn partition<'a>(&self, records: &'a [AisRecord]) -> Vec<Vec<&'a AisRecord>> {
        let mut out = vec![Vec::new(); self.rounds.len()];
        for r in records {
            if let Some(i) = self.round_of(r.timestamp.date_naive()) {
                out[i].push(r);
            }
        }
        out
    }
}

/// One round per `days_per_round`-day window (UTC), counted from the first
/// day present; windows without data produce no round.
pub fn chunk_by_day<'a, I>(records: I, days_per_round: u32) -> Result<RoundPlan, IngestError>
where
    I: IntoIterator<Item = &'a AisRecord>,
{
    if days_per_round == 0 {
        return Err(IngestError::InvalidPlan("days_per_round must be positive".into()));
    }
    let days: BTreeSet<NaiveDate> = records.into_iter().map(|r| r.timestamp.date_naive()).collect();
    let Some(&first) = days.first() else {
        return RoundPlan::new(Vec::new());
    };
    let k = days_per_round as i64;
    let windows: BTreeSet<i64> = days
        .iter()
        .map(|d| (*d - first).num_days() / k)
        .collect();
    let rounds = windows
        .into_iter()
        .map(|w| {
            let start = first + chrono::Duration::days(w * k);
            ChunkDescriptor {
                start,
                end: start + chrono::Duration::days(k - 1),
            }
        })
        .collect();
    RoundPlan::new(rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ShipType, StateVector};
    use chrono::{TimeZone, Utc};

    fn on_day(y: i32, m: u32, d: u32) -> AisRecord {
        at(date(y, m, d))
    }

    fn at(day: NaiveDate) -> AisRecord {
        AisRecord {
            mmsi: 7,
            timestamp: Utc.from_utc_datetime(&day.and_hms_opt(12, 0, 0).unwrap()),
            state: StateVector::new(11.0, 57.0, 1.0, 1.0).unwrap(),
            ship_type: ShipType::Tanker,
        }
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn descriptor_text_round_trip() {
        let c = ChunkDescriptor::new(date(2018, 7, 1), date(2018, 7, 2)).unwrap();
        assert_eq!(c.to_string(), "2018-07-01/2018-07-02");
        assert_eq!("2018-07-01/2018-07-02".parse::<ChunkDescriptor>().unwrap(), c);
        assert!("2018-07-02/2018-07-01".parse::<ChunkDescriptor>().is_err());
        assert!("yesterday".parse::<ChunkDescriptor>().is_err());
    }

    #[test]
    fn one_day_one_round() {
        let recs = vec![on_day(2018, 7, 1), on_day(2018, 7, 1)];
        assert_eq!(chunk_by_day(&recs, 1).unwrap().len(), 1);
    }

    #[test]
    fn ten_days_in_pairs() {
        let recs: Vec<_> = (1..=10).map(|d| on_day(2018, 7, d)).collect();
        let plan = chunk_by_day(&recs, 2).unwrap();
        assert_eq!(plan.len(), 5);
        assert_eq!(plan.rounds()[0].to_string(), "2018-07-01/2018-07-02");
        let parts = plan.partition(&recs);
        assert!(parts.iter().all(|p| p.len() == 2));
    }

    #[test]
    fn year_of_days() {
        let start = date(2017, 7, 1);
        let recs: Vec<_> = (0..365)
            .map(|i| at(start + chrono::Duration::days(i)))
            .collect();
        let plan = chunk_by_day(&recs, 1).unwrap();
        assert_eq!(plan.len(), 365);
        assert_eq!(plan.rounds().last().unwrap().end, date(2018, 6, 30));
    }

    #[test]
    fn gaps_skip_empty_windows() {
        let recs = vec![on_day(2018, 7, 1), on_day(2018, 7, 5)];
        let plan = chunk_by_day(&recs, 1).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan.round_of(date(2018, 7, 5)), Some(1));
        assert_eq!(plan.round_of(date(2018, 7, 3)), None);
    }

    #[test]
    fn consecutive_plan() {
        let plan = RoundPlan::consecutive(date(2018, 7, 1), 3, 2).unwrap();
        assert_eq!(plan.rounds()[2].to_string(), "2018-07-05/2018-07-06");
        assert!(RoundPlan::new(vec![plan.rounds()[1], plan.rounds()[0]]).is_err());
    }
}
