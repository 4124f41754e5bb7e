use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, Utc};

use super::detect::AnomalyRecord;
use super::{InferenceError, Verdict};

pub const ANOMALY_CSV_HEADER: [&str; 12] = [
    "mmsi", "timestamp", "lon", "lat", "sog", "cog", "verdict", "p_value", "p_lon", "p_lat", "p_sog", "p_cog",
];

const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// Flat form of a scored record, as written to and read from anomaly CSVs.
/// The p-values are absent for records without a matching prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRow {
    pub mmsi: u32,
    pub timestamp: DateTime<Utc>,
    pub lon: f64,
    pub lat: f64,
    pub sog: f64,
    pub cog: f64,
    pub verdict: Verdict,
    pub p_value: Option<f64>,
    pub per_dim_p: Option<[f64; 4]>,
}

impl From<&AnomalyRecord> for AnomalyRow {
    fn from(a: &AnomalyRecord) -> Self {
        let s = &a.record.state;
        AnomalyRow {
            mmsi: a.record.mmsi,
            timestamp: a.record.timestamp,
            lon: s.lon,
            lat: s.lat,
            sog: s.sog,
            cog: s.cog,
            verdict: a.verdict,
            p_value: a.report.fit.as_ref().map(|f| f.p_value),
            per_dim_p: a.report.fit.as_ref().map(|f| f.per_dim_p),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_anomaly_csv<'a, W, I>(sink: W, rows: I) -> Result<(), InferenceError>
where
    W: Write,
    I: IntoIterator<Item = &'a AnomalyRow>,
{
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(ANOMALY_CSV_HEADER)?;
    for r in rows {
        let p = r.per_dim_p.map(|p| p.map(Some)).unwrap_or([None; 4]);
        w.write_record([
            r.mmsi.to_string(),
            r.timestamp.format(ISO_FORMAT).to_string(),
            r.lon.to_string(),
            r.lat.to_string(),
            r.sog.to_string(),
            r.cog.to_string(),
            r.verdict.to_string(),
            opt(r.p_value),
            opt(p[0]),
            opt(p[1]),
            opt(p[2]),
            opt(p[3]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_anomaly_csv<R: Read>(source: R) -> Result<Vec<AnomalyRow>, InferenceError> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(ANOMALY_CSV_HEADER.iter().copied()) {
        return Err(InferenceError::Row {
            line: 1,
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let err = |message: String| InferenceError::Row { line, message };
        let num = |j: usize| -> Result<f64, InferenceError> {
            row[j].parse::<f64>().map_err(|_| err(format!("bad {} {:?}", ANOMALY_CSV_HEADER[j], &row[j])))
        };
        let opt_num = |j: usize| -> Result<Option<f64>, InferenceError> {
            if row[j].is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        let timestamp = NaiveDateTime::parse_from_str(&row[1], ISO_FORMAT)
            .map_err(|_| err(format!("bad timestamp {:?}", &row[1])))?
            .and_utc();
        let p_value = opt_num(7)?;
        let dims = [opt_num(8)?, opt_num(9)?, opt_num(10)?, opt_num(11)?];
        let per_dim_p = match dims {
            [Some(a), Some(b), Some(c), Some(d)] => Some([a, b, c, d]),
            [None, None, None, None] => None,
            _ => return Err(err("partially missing per-dimension p-values".into())),
        };
        out.push(AnomalyRow {
            mmsi: row[0].parse().map_err(|_| err(format!("bad mmsi {:?}", &row[0])))?,
            timestamp,
            lon: num(2)?,
            lat: num(3)?,
            sog: num(4)?,
            cog: num(5)?,
            verdict: row[6].parse()?,
            p_value,
            per_dim_p,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            AnomalyRow {
                mmsi: 219000001,
                timestamp: Utc.with_ymd_and_hms(2018, 7, 1, 0, 0, 10).unwrap(),
                lon: 11.96524,
                lat: 57.7073,
                sog: 12.3,
                cog: 87.5,
                verdict: Verdict::Speed,
                p_value: Some(1.234e-7),
                per_dim_p: Some([0.5, 0.25, 1e-9, 0.75]),
            },
            AnomalyRow {
                mmsi: 219000002,
                timestamp: Utc.with_ymd_and_hms(2018, 7, 1, 0, 1, 10).unwrap(),
                lon: 11.0,
                lat: 57.0,
                sog: 0.0,
                cog: 0.0,
                verdict: Verdict::Position,
                p_value: None,
                per_dim_p: None,
            },
        ];
        let mut buf = Vec::new();
        write_anomaly_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mmsi,timestamp,lon,lat,sog,cog,verdict,p_value,p_lon,p_lat,p_sog,p_cog\n"));
        assert!(text.contains("2018-07-01T00:00:10Z"));
        assert_eq!(read_anomaly_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn rejects_foreign_schema() {
        assert!(read_anomaly_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
    }
}
