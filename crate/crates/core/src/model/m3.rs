use std::collections::BTreeMap;

use super::cell::{Cell, CellIndex};
use super::prototype::Prototype;
use super::state::StateVector;
use super::{ModelConfig, ModelError};

/// A per-ship-type movement model: grid cells with capped Gaussian mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct M3Model {
    config: ModelConfig,
    cells: BTreeMap<CellIndex, Cell>,
    trained_records: u64,
}

impl M3Model {
    /// The empty model. It is the neutral element of [`aggregate`].
    pub fn empty(config: ModelConfig) -> Self {
        Self {
            config,
            cells: BTreeMap::new(),
            trained_records: 0,
        }
    }

    /// Assembles a model from parts, checking every structural invariant.
    pub fn from_parts(
        config: ModelConfig,
        cells: BTreeMap<CellIndex, Cell>,
        trained_records: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let model = Self {
            config,
            cells,
            trained_records,
        };
        model.check_invariants()?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn trained_records(&self) -> u64 {
        self.trained_records
    }

    pub fn cells(&self) -> impl ExactSizeIterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn cell(&self, index: CellIndex) -> Option<&Cell> {
        self.cells.get(&index)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn prototype_count(&self) -> usize {
        self.cells.values().map(|c| c.prototypes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Absorbs one record: nearest prototype in the record's cell if it is
    /// closer than the new-prototype distance, else a new prototype; then the
    /// cell is brought back under capacity.
    pub fn update(&mut self, x: &StateVector) {
        let index = self.config.grid.cell_index(x);
        let hyper = self.config.hyper;
        let point = x.to_array();
        let cell = self.cells.entry(index).or_insert_with(|| Cell::new(index));
        match cell.nearest_prototype(&point, &hyper.scales) {
            Some((i, d)) if d < hyper.new_prototype_distance => cell.prototypes[i].absorb(&point),
            _ => cell.prototypes.push(Prototype::from_point(point)),
        }
        cell.enforce_capacity(hyper.max_prototypes as usize, &hyper.scales);
        self.trained_records += 1;
    }

    /// Trains on a sequence of records in the given order.
    pub fn train<'a, I>(&mut self, records: I)
    where
        I: IntoIterator<Item = &'a StateVector>,
    {
        for x in records {
            self.update(x);
        }
    }

    pub fn check_invariants(&self) -> Result<(), ModelError> {
        let cap = self.config.hyper.max_prototypes as usize;
        let mut total = 0u64;
        for (key, cell) in &self.cells {
            if *key != cell.index {
                return Err(ModelError::InvalidConfig(format!(
                    "cell key {key} does not match cell index {}",
                    cell.index
                )));
            }
            if cell.prototypes.len() > cap {
                return Err(ModelError::InvalidConfig(format!(
                    "cell {key} holds {} prototypes, capacity is {cap}",
                    cell.prototypes.len()
                )));
            }
            for p in &cell.prototypes {
                if p.count == 0 {
                    return Err(ModelError::InvalidConfig(format!(
                        "zero-count prototype in cell {key}"
                    )));
                }
                total = total.checked_add(p.count).ok_or_else(|| {
                    ModelError::InvalidConfig("prototype counts overflow".into())
                })?;
            }
        }
        if total != self.trained_records {
            return Err(ModelError::InvalidConfig(format!(
                "trained_records {} differs from summed prototype counts {total}",
                self.trained_records
            )));
        }
        Ok(())
    }
}

/// Server-side aggregation of models that share one configuration.
///
/// Per cell, the prototype lists of all inputs are concatenated in input
/// order and the closest pair is merged until the cell is within capacity.
pub fn aggregate(models: &[&M3Model]) -> Result<M3Model, ModelError> {
    let first = models
        .first()
        .ok_or_else(|| ModelError::InvalidConfig("aggregate needs at least one model".into()))?;
    let config = first.config;
    for m in &models[1..] {
        config.ensure_matches(&m.config)?;
    }

    let mut cells: BTreeMap<CellIndex, Cell> = BTreeMap::new();
    let mut trained_records = 0u64;
    for m in models {
        trained_records += m.trained_records;
        for (index, cell) in &m.cells {
            cells
                .entry(*index)
                .or_insert_with(|| Cell::new(*index))
                .prototypes
                .extend(cell.prototypes.iter().cloned());
        }
    }
    let cap = config.hyper.max_prototypes as usize;
    for cell in cells.values_mut() {
        cell.enforce_capacity(cap, &config.hyper.scales);
    }
    Ok(M3Model {
        config,
        cells,
        trained_records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GridConfig, Hyperparams, Scales, ShipType};

    fn config(p: u32, d_new: f64) -> ModelConfig {
        let grid = GridConfig::new(11.0, 57.0, 0.01).unwrap();
        ModelConfig::new(
            grid,
            ShipType::Cargo,
            Hyperparams {
                max_prototypes: p,
                new_prototype_distance: d_new,
                scales: Scales::for_grid(&grid),
            },
        )
        .unwrap()
    }

    fn sv(lon: f64, lat: f64, sog: f64, cog: f64) -> StateVector {
        StateVector::new(lon, lat, sog, cog).unwrap()
    }

    #[test]
    fn first_update_creates_cell_and_prototype() {
        let mut m = M3Model::empty(config(8, 1.0));
        let x = sv(11.005, 57.005, 10.0, 90.0);
        m.update(&x);
        assert_eq!(m.cell_count(), 1);
        let cell = m.cell(CellIndex::new(0, 0)).unwrap();
        assert_eq!(cell.prototypes, vec![Prototype::from_point(x.to_array())]);
        assert_eq!(m.trained_records(), 1);
    }

    #[test]
    fn identical_record_is_absorbed() {
        let mut m = M3Model::empty(config(8, 1.0));
        let x = sv(11.005, 57.005, 10.0, 90.0);
        m.update(&x);
        m.update(&x);
        let p = &m.cell(CellIndex::new(0, 0)).unwrap().prototypes;
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].count, 2);
        assert_eq!(p[0].mean, x.to_array());
        assert_eq!(p[0].m2, [[0.0; 4]; 4]);
    }

    #[test]
    fn distant_record_seeds_new_prototype_and_capacity_holds() {
        let mut m = M3Model::empty(config(2, 1.0));
        m.update(&sv(11.005, 57.005, 10.0, 90.0));
        m.update(&sv(11.005, 57.005, 20.0, 90.0));
        m.update(&sv(11.005, 57.005, 10.0, 270.0));
        let c = m.cell(CellIndex::new(0, 0)).unwrap();
        assert_eq!(c.prototypes.len(), 2);
        assert_eq!(c.total_count(), 3);
        m.check_invariants().unwrap();
    }

    #[test]
    fn aggregate_single_and_empty_identity() {
        let mut m = M3Model::empty(config(3, 1.0));
        for i in 0..50 {
            let f = i as f64;
            m.update(&sv(11.0 + f * 0.0013, 57.0 + f * 0.0007, 5.0 + (f % 7.0), (f * 37.0) % 360.0));
        }
        assert_eq!(aggregate(&[&m]).unwrap(), m);
        let empty = M3Model::empty(*m.config());
        assert_eq!(aggregate(&[&empty, &m]).unwrap(), m);
        assert_eq!(aggregate(&[&m, &empty]).unwrap(), m);
    }

    #[test]
    fn aggregate_rejects_mismatch() {
        let a = M3Model::empty(config(3, 1.0));
        let b = M3Model::empty(config(4, 1.0));
        assert!(matches!(aggregate(&[&a, &b]), Err(ModelError::ConfigMismatch(_))));
        let mut other = config(3, 1.0);
        other.ship_type = ShipType::Tanker;
        let c = M3Model::empty(other);
        assert!(matches!(aggregate(&[&a, &c]), Err(ModelError::ConfigMismatch(_))));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn aggregate_disjoint_cells_is_union() {
        let cfg = config(8, 1.0);
        let mut a = M3Model::empty(cfg);
        let mut b = M3Model::empty(cfg);
        a.update(&sv(11.005, 57.005, 10.0, 90.0));
        a.update(&sv(11.006, 57.004, 11.0, 92.0));
        b.update(&sv(11.105, 57.105, 3.0, 10.0));
        let g = aggregate(&[&a, &b]).unwrap();
        assert_eq!(g.cell_count(), 2);
        assert_eq!(g.trained_records(), 3);
        assert_eq!(g.cell(CellIndex::new(0, 0)), a.cell(CellIndex::new(0, 0)));
        assert_eq!(g.cell(CellIndex::new(10, 10)), b.cell(CellIndex::new(10, 10)));
    }

    #[test]
    fn aggregate_merges_down_to_capacity() {
        let cfg = config(1, 0.0);
        let mut a = M3Model::empty(cfg);
        let mut b = M3Model::empty(cfg);
        a.update(&sv(11.001, 57.001, 10.0, 90.0));
        b.update(&sv(11.003, 57.003, 12.0, 90.0));
        let g = aggregate(&[&a, &b]).unwrap();
        let c = g.cell(CellIndex::new(0, 0)).unwrap();
        assert_eq!(c.prototypes.len(), 1);
        assert_eq!(c.prototypes[0].count, 2);
        assert!((c.prototypes[0].mean[2] - 11.0).abs() < 1e-12);
        g.check_invariants().unwrap();
    }
}
