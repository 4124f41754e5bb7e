use std::io::{Read, Write};

use chrono::NaiveDateTime;

use super::{AisRecord, IngestError};
use crate::model::{ShipType, StateVector};

/// AISDK timestamp layout, e.g. `01/07/2018 00:00:10`.
pub const AIS_TIMESTAMP_FORMAT: &str = "%d/%m/%Y %H:%M:%S";

const COL_TIMESTAMP: &str = "# Timestamp";
const COL_MMSI: &str = "MMSI";
const COL_LAT: &str = "Latitude";
const COL_LON: &str = "Longitude";
const COL_SOG: &str = "SOG";
const COL_COG: &str = "COG";
const COL_SHIP_TYPE: &str = "Ship type";

/// Column layout written by [`write_ais_csv`].
pub const AIS_CSV_HEADER: [&str; 7] = [COL_TIMESTAMP, COL_MMSI, COL_LAT, COL_LON, COL_SOG, COL_COG, COL_SHIP_TYPE];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    OtherType,
    MissingField(&'static str),
    Unparseable(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowRejection {
    pub line: u64,
    pub reason: DropReason,
}

/// Rows dropped while parsing, by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropStats {
    pub rows: u64,
    pub emitted: u64,
    pub other_type: u64,
    pub missing_field: u64,
    pub unparseable: u64,
}

impl DropStats {
    pub fn tally(&mut self, outcome: &Result<AisRecord, RowRejection>) {
        self.rows += 1;
        match outcome {
            Ok(_) => self.emitted += 1,
            Err(r) => match r.reason {
                DropReason::OtherType => self.other_type += 1,
                DropReason::MissingField(_) => self.missing_field += 1,
                DropReason::Unparseable(_) => self.unparseable += 1,
            },
        }
    }

    pub fn dropped(&self) -> u64 {
        self.other_type + self.missing_field + self.unparseable
    }
}

#[derive(Debug, Clone, Copy)]
struct Columns {
    timestamp: usize,
    mmsi: usize,
    lat: usize,
    lon: usize,
    sog: usize,
    cog: usize,
    ship_type: usize,
}

impl Columns {
    fn locate(header: &csv::StringRecord) -> Result<Self, IngestError> {
        let find = |name: &'static str| {
            let bare = name.trim_start_matches("# ");
            header
                .iter()
                .position(|h| {
                    let h = h.trim().trim_start_matches('\u{feff}');
                    h.eq_ignore_ascii_case(name) || h.eq_ignore_ascii_case(bare)
                })
                .ok_or(IngestError::MissingColumn(name))
        };
        Ok(Self {
            timestamp: find(COL_TIMESTAMP)?,
            mmsi: find(COL_MMSI)?,
            lat: find(COL_LAT)?,
            lon: find(COL_LON)?,
            sog: find(COL_SOG)?,
            cog: find(COL_COG)?,
            ship_type: find(COL_SHIP_TYPE)?,
        })
    }
}

/// Streaming AISDK reader. Every data row yields either a record or the
/// reason it was dropped; malformed rows never end the stream.
pub struct AisCsvReader<R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    columns: Columns,
    line: u64,
}

impl<R: Read> AisCsvReader<R> {
    pub fn new(source: R) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(true)
            .from_reader(source);
        let columns = Columns::locate(reader.headers()?)?;
        Ok(Self {
            rows: reader.into_records(),
            columns,
            line: 1,
        })
    }

    fn parse_row(&self, row: &csv::StringRecord) -> Result<AisRecord, DropReason> {
        let c = &self.columns;
        let field = |idx: usize, name: &'static str| -> Result<&str, DropReason> {
            match row.get(idx) {
                None => Err(DropReason::Unparseable(format!("row too short for {name}"))),
                Some(v) if v.trim().is_empty() => Err(DropReason::MissingField(name)),
                Some(v) => Ok(v.trim()),
            }
        };
        let ship_type = match field(c.ship_type, COL_SHIP_TYPE)?.parse::<ShipType>() {
            Ok(t) => t,
            Err(_) => return Err(DropReason::OtherType),
        };
        let ts = field(c.timestamp, COL_TIMESTAMP)?;
        let mmsi = field(c.mmsi, COL_MMSI)?;
        let lat = field(c.lat, COL_LAT)?;
        let lon = field(c.lon, COL_LON)?;
        let sog = field(c.sog, COL_SOG)?;
        let cog = field(c.cog, COL_COG)?;

        let bad = |what: &str, v: &str| DropReason::Unparseable(format!("{what} {v:?}"));
        let timestamp = NaiveDateTime::parse_from_str(ts, AIS_TIMESTAMP_FORMAT)
            .map_err(|_| bad("timestamp", ts))?
            .and_utc();
        let mmsi = mmsi.parse::<u32>().map_err(|_| bad("mmsi", mmsi))?;
        let num = |what: &str, v: &str| v.parse::<f64>().map_err(|_| bad(what, v));
        let state = StateVector::new(
            num("longitude", lon)?,
            num("latitude", lat)?,
            num("sog", sog)?,
            num("cog", cog)?,
        )
        .map_err(|e| DropReason::Unparseable(e.to_string()))?;
        Ok(AisRecord {
            mmsi,
            timestamp,
            state,
            ship_type,
        })
    }
}

impl<R: Read> Iterator for AisCsvReader<R> {
    type Item = Result<AisRecord, RowRejection>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = self.rows.next()?;
        self.line += 1;
        let line = self.line;
        Some(match row {
            Ok(row) => self
                .parse_row(&row)
                .map_err(|reason| RowRejection { line, reason }),
            Err(e) => Err(RowRejection {
                line,
                reason: DropReason::Unparseable(e.to_string()),
            }),
        })
    }
}

/// Reads an AISDK CSV, keeping complete cargo/tanker/passenger records.
pub fn parse_ais_csv<R: Read>(source: R) -> Result<(Vec<AisRecord>, DropStats), IngestError> {
    let mut stats = DropStats::default();
    let mut records = Vec::new();
    for outcome in AisCsvReader::new(source)? {
        stats.tally(&outcome);
        if let Ok(r) = outcome {
            records.push(r);
        }
    }
    Ok((records, stats))
}

pub(crate) fn ship_type_label(t: ShipType) -> &'static str {
    match t {
        ShipType::Cargo => "Cargo",
        ShipType::Tanker => "Tanker",
        ShipType::Passenger => "Passenger",
    }
}

/// Writes records in the AISDK column layout read by [`parse_ais_csv`].
pub fn write_ais_csv<'a, W, I>(sink: W, records: I) -> Result<(), IngestError>
where
    W: Write,
    I: IntoIterator<Item = &'a AisRecord>,
{
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(AIS_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.timestamp.format(AIS_TIMESTAMP_FORMAT).to_string(),
            r.mmsi.to_string(),
            r.state.lat.to_string(),
            r.state.lon.to_string(),
            r.state.sog.to_string(),
            r.state.cog.to_string(),
            ship_type_label(r.ship_type).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Bytes a client would upload to ship these records as AISDK CSV; the
/// reference point for centralized training costs.
pub fn csv_upload_bytes<'a, I>(records: I) -> u64
where
    I: IntoIterator<Item = &'a AisRecord>,
{
    let mut buf = Vec::new();
    write_ais_csv(&mut buf, records).expect("writing to memory cannot fail");
    buf.len() as u64
}
