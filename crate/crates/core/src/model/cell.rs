use std::fmt;

use super::prototype::Prototype;
use super::state::STATE_DIMS;
use super::Scales;

/// Integer grid coordinates. Ordering is by row, then column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub row: i32,
    pub col: i32,
}

impl CellIndex {
    pub const fn new(row: i32, col: i32) -> Self {
        Self { row, col }
    }

    /// This cell and its eight neighbours in ascending (row, col) order.
    pub fn neighborhood(self) -> impl Iterator<Item = CellIndex> {
        (-1..=1).flat_map(move |dr| {
            (-1..=1).map(move |dc| {
                CellIndex::new(self.row.saturating_add(dr), self.col.saturating_add(dc))
            })
        })
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: CellIndex,
    pub prototypes: Vec<Prototype>,
}

impl Cell {
    pub fn new(index: CellIndex) -> Self {
        Self {
            index,
            prototypes: Vec::new(),
        }
    }

    pub fn total_count(&self) -> u64 {
        self.prototypes.iter().map(|p| p.count).sum()
    }

    /// Mixing weights `count_c / sum(count)`; empty for an empty cell.
    pub fn weights(&self) -> Vec<f64> {
        let total = self.total_count() as f64;
        self.prototypes
            .iter()
            .map(|p| p.count as f64 / total)
            .collect()
    }

    /// Index and distance of the prototype whose mean is closest to `x`.
    /// Ties go to the lowest index.
    pub fn nearest_prototype(&self, x: &[f64; STATE_DIMS], scales: &Scales) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.prototypes.iter().enumerate() {
            let d = scales.distance(x, &p.mean);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    /// Merges the closest pair of prototypes until at most `max` remain.
    ///
    /// The merged prototype takes the slot of the lower index of the pair and
    /// the other is removed. Equidistant pairs resolve to the lexicographically
    /// smallest `(i, j)`.
    pub fn enforce_capacity(&mut self, max: usize, scales: &Scales) {
        while self.prototypes.len() > max {
            let (i, j) = self.closest_pair(scales);
            let merged = Prototype::merge(&self.prototypes[i], &self.prototypes[j]);
            self.prototypes[i] = merged;
            self.prototypes.remove(j);
        }
    }

    fn closest_pair(&self, scales: &Scales) -> (usize, usize) {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..self.prototypes.len() {
            for j in (i + 1)..self.prototypes.len() {
                let d = scales.distance(&self.prototypes[i].mean, &self.prototypes[j].mean);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        (best.0, best.1)
    }
}
