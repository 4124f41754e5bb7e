//! Canonical little-endian model encoding, used both for model files and as
//! the payload of model messages on the wire.
//!
//! ```text
//! header (92 bytes)
//!   magic "M3FM" | version u16 | ship_type u8 | state_dims u8
//!   origin_lon f64 | origin_lat f64 | cell_size f64
//!   max_prototypes u32 | new_prototype_distance f64 | scales 4 x f64
//!   trained_records u64 | cell_count u64
//! per cell, ascending (row, col) (10 bytes)
//!   row i32 | col i32 | prototype_count u16
//! per prototype (120 bytes)
//!   count u64 | mean 4 x f64 | m2 upper triangle, row-major, 10 x f64
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use super::cell::{Cell, CellIndex};
use super::prototype::Prototype;
use super::state::STATE_DIMS;
use super::{GridConfig, Hyperparams, M3Model, ModelConfig, ModelError, Scales, ShipType};

pub const MAGIC: [u8; 4] = *b"M3FM";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 92;
pub const CELL_RECORD_LEN: usize = 10;
pub const PROTOTYPE_RECORD_LEN: usize = 120;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown ship type code {0}")]
    UnknownShipType(u8),
    #[error("unsupported state dimension count {0}")]
    UnsupportedDims(u8),
    #[error("payload truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after model")]
    TrailingBytes(usize),
    #[error("cells out of canonical order at {0}")]
    NonCanonical(CellIndex),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

impl M3Model {
    /// Exact encoded length without encoding.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.cell_count() * CELL_RECORD_LEN + self.prototype_count() * PROTOTYPE_RECORD_LEN
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.config();
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(cfg.ship_type.code());
        out.push(STATE_DIMS as u8);
        put_f64(&mut out, cfg.grid.origin_lon);
        put_f64(&mut out, cfg.grid.origin_lat);
        put_f64(&mut out, cfg.grid.cell_size);
        out.extend_from_slice(&cfg.hyper.max_prototypes.to_le_bytes());
        put_f64(&mut out, cfg.hyper.new_prototype_distance);
        for s in cfg.hyper.scales.0 {
            put_f64(&mut out, s);
        }
        out.extend_from_slice(&self.trained_records().to_le_bytes());
        out.extend_from_slice(&(self.cell_count() as u64).to_le_bytes());
        for cell in self.cells() {
            out.extend_from_slice(&cell.index.row.to_le_bytes());
            out.extend_from_slice(&cell.index.col.to_le_bytes());
            out.extend_from_slice(&(cell.prototypes.len() as u16).to_le_bytes());
            for p in &cell.prototypes {
                out.extend_from_slice(&p.count.to_le_bytes());
                for m in p.mean {
                    put_f64(&mut out, m);
                }
                for i in 0..STATE_DIMS {
                    for j in i..STATE_DIMS {
                        put_f64(&mut out, p.m2[i][j]);
                    }
                }
            }
        }
        debug_assert_eq!(out.len(), self.encoded_len());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != MAGIC {
            return Err(DecodeError::BadMagic(magic));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(DecodeError::UnsupportedVersion(version));
        }
        let code = r.u8()?;
        let ship_type = ShipType::from_code(code).ok_or(DecodeError::UnknownShipType(code))?;
        let dims = r.u8()?;
        if dims as usize != STATE_DIMS {
            return Err(DecodeError::UnsupportedDims(dims));
        }
        let grid = GridConfig {
            origin_lon: r.f64()?,
            origin_lat: r.f64()?,
            cell_size: r.f64()?,
        };
        let max_prototypes = r.u32()?;
        let new_prototype_distance = r.f64()?;
        let scales = Scales([r.f64()?, r.f64()?, r.f64()?, r.f64()?]);
        let config = ModelConfig::new(
            grid,
            ship_type,
            Hyperparams {
                max_prototypes,
                new_prototype_distance,
                scales,
            },
        )?;
        let trained_records = r.u64()?;
        let cell_count = r.u64()?;

        let mut cells = BTreeMap::new();
        let mut last: Option<CellIndex> = None;
        for _ in 0..cell_count {
            let index = CellIndex::new(r.i32()?, r.i32()?);
            if last.is_some_and(|l| l >= index) {
                return Err(DecodeError::NonCanonical(index));
            }
            last = Some(index);
            let n = r.u16()? as usize;
            let mut cell = Cell::new(index);
            // Bounded by the remaining payload, not by the claimed count.
            cell.prototypes.reserve(n.min(r.remaining() / PROTOTYPE_RECORD_LEN));
            for _ in 0..n {
                let count = r.u64()?;
                let mut mean = [0.0; STATE_DIMS];
                for m in mean.iter_mut() {
                    *m = r.f64()?;
                }
                let mut m2 = [[0.0; STATE_DIMS]; STATE_DIMS];
                for i in 0..STATE_DIMS {
                    for j in i..STATE_DIMS {
                        m2[i][j] = r.f64()?;
                        m2[j][i] = m2[i][j];
                    }
                }
                cell.prototypes.push(Prototype { count, mean, m2 });
            }
            cells.insert(index, cell);
        }
        if r.remaining() != 0 {
            return Err(DecodeError::TrailingBytes(r.remaining()));
        }
        Ok(M3Model::from_parts(config, cells, trained_records)?)
    }
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(DecodeError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32, DecodeError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateVector;

    fn config() -> ModelConfig {
        ModelConfig::with_defaults(GridConfig::new(11.0, 57.0, 0.01).unwrap(), ShipType::Tanker)
    }

    fn trained() -> M3Model {
        let mut m = M3Model::empty(config());
        for i in 0..200 {
            let f = i as f64;
            let x = StateVector::new(
                11.0 + (f * 0.00037) % 0.05,
                57.0 + (f * 0.00071) % 0.04,
                (f * 0.3) % 20.0,
                (f * 13.0) % 360.0,
            )
            .unwrap();
            m.update(&x);
        }
        m
    }

    #[test]
    fn header_layout_adds_up() {
        assert_eq!(HEADER_LEN, 4 + 2 + 1 + 1 + 8 * 3 + 4 + 8 + 8 * 4 + 8 + 8);
        assert_eq!(CELL_RECORD_LEN, 4 + 4 + 2);
        assert_eq!(PROTOTYPE_RECORD_LEN, 8 + 8 * 4 + 8 * 10);
    }

    #[test]
    fn empty_model_is_header_only() {
        let m = M3Model::empty(config());
        let b = m.to_bytes();
        assert_eq!(b.len(), HEADER_LEN);
        assert_eq!(&b[..4], b"M3FM");
        assert_eq!(b[6], 1);
        assert_eq!(M3Model::from_bytes(&b).unwrap(), m);
    }

    #[test]
    fn single_prototype_payload_length() {
        let mut m = M3Model::empty(config());
        m.update(&StateVector::new(11.5, 57.5, 3.0, 4.0).unwrap());
        assert_eq!(m.to_bytes().len(), 92 + 10 + 120);
    }

    #[test]
    fn round_trip_is_exact_and_idempotent() {
        let m = trained();
        let b = m.to_bytes();
        let back = M3Model::from_bytes(&b).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), b);
    }

    #[test]
    fn rejects_corruption() {
        let b = trained().to_bytes();

        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(M3Model::from_bytes(&bad), Err(DecodeError::BadMagic(_))));

        let mut bad = b.clone();
        bad[4] = 2;
        assert!(matches!(M3Model::from_bytes(&bad), Err(DecodeError::UnsupportedVersion(2))));

        let mut bad = b.clone();
        bad[6] = 9;
        assert!(matches!(M3Model::from_bytes(&bad), Err(DecodeError::UnknownShipType(9))));

        let mut bad = b.clone();
        bad[7] = 5;
        assert!(matches!(M3Model::from_bytes(&bad), Err(DecodeError::UnsupportedDims(5))));

        assert!(matches!(
            M3Model::from_bytes(&b[..b.len() - 1]),
            Err(DecodeError::Truncated(_))
        ));
        assert!(matches!(M3Model::from_bytes(&b[..10]), Err(DecodeError::Truncated(_))));

        let mut bad = b.clone();
        bad.push(0);
        assert!(matches!(M3Model::from_bytes(&bad), Err(DecodeError::TrailingBytes(1))));
    }

    #[test]
    fn rejects_inconsistent_record_count() {
        let mut b = trained().to_bytes();
        // trained_records lives at offset 76
        b[76] ^= 1;
        assert!(matches!(M3Model::from_bytes(&b), Err(DecodeError::Invalid(_))));
    }
}
