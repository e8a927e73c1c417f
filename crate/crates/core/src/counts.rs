use crate::binning::BinningSpec;
use crate::error::{Error, Result};
use crate::geometry::{CellIndex, GridGeometry};
use crate::ingest::Observation;

/// Per-cell heading histograms.
///
/// Counts are exact integers; probabilities are derived from them on demand
/// so incremental updates never drift.
#[derive(Debug, Clone, PartialEq)]
pub struct CountGrid {
    geometry: GridGeometry,
    binning: BinningSpec,
    counts: Vec<u64>,
    totals: Vec<u64>,
    skipped: u64,
}

impl CountGrid {
    pub fn new(geometry: GridGeometry, binning: BinningSpec) -> Self {
        let cells = geometry.cell_count();
        CountGrid { geometry, binning, counts: vec![0; cells * binning.k()], totals: vec![0; cells], skipped: 0 }
    }

    /// Rebuilds a grid from raw per-cell counts (`cells * k`, direction fastest).
    pub fn from_counts(geometry: GridGeometry, binning: BinningSpec, counts: Vec<u64>, skipped: u64) -> Result<Self> {
        let k = binning.k();
        if counts.len() != geometry.cell_count() * k {
            return Err(Error::InvalidGeometry(format!(
                "expected {} counts, got {}",
                geometry.cell_count() * k,
                counts.len()
            )));
        }
        let totals = counts.chunks_exact(k).map(|c| c.iter().sum()).collect();
        Ok(CountGrid { geometry, binning, counts, totals, skipped })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn binning(&self) -> &BinningSpec {
        &self.binning
    }

    pub fn k(&self) -> usize {
        self.binning.k()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn cell_counts(&self, cell: usize) -> &[u64] {
        let k = self.k();
        &self.counts[cell * k..(cell + 1) * k]
    }

    pub fn cell_total(&self, cell: usize) -> u64 {
        self.totals[cell]
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// Observations that could not be counted (outside the grid or without heading).
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn total_observations(&self) -> u64 {
        self.totals.iter().sum()
    }

    pub fn visited_cells(&self) -> usize {
        self.totals.iter().filter(|&&n| n > 0).count()
    }

    /// Counts one observation; returns the cell it landed in, or `None` when
    /// it was skipped.
    pub fn accumulate(&mut self, obs: &Observation) -> Option<CellIndex> {
        let located = obs
            .delta
            .and_then(|d| self.binning.bin(d).ok())
            .and_then(|bin| self.geometry.world_to_cell(obs.x, obs.y).ok().map(|c| (c, bin)));
        match located {
            Some((cell, bin)) => {
                let idx = self.geometry.index(cell);
                self.counts[idx * self.binning.k() + bin] += 1;
                self.totals[idx] += 1;
                Some(cell)
            }
            None => {
                self.skipped += 1;
                None
            }
        }
    }

    pub fn accumulate_all<'a>(&mut self, observations: impl IntoIterator<Item = &'a Observation>) {
        for obs in observations {
            self.accumulate(obs);
        }
    }

    fn ensure_compatible(&self, other: &CountGrid) -> Result<()> {
        self.geometry.ensure_same(&other.geometry)?;
        if self.binning != other.binning {
            return Err(Error::GeometryMismatch(format!("binning {:?} vs {:?}", self.binning, other.binning)));
        }
        Ok(())
    }

    /// Adds `other` into `self` elementwise.
    pub fn merge_from(&mut self, other: &CountGrid) -> Result<()> {
        self.ensure_compatible(other)?;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.skipped += other.skipped;
        Ok(())
    }

    pub fn merge(a: &CountGrid, b: &CountGrid) -> Result<CountGrid> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn obs(x: f64, y: f64, delta: f64) -> Observation {
        Observation { person_id: 0, t: 0.0, x, y, delta: Some(delta) }
    }

    fn grid() -> CountGrid {
        CountGrid::new(GridGeometry::new(4, 3, 1.0, 0.0, 0.0).unwrap(), BinningSpec::default())
    }

    #[test]
    fn single_observation() {
        let mut g = grid();
        assert_eq!(g.accumulate(&obs(1.5, 2.5, 0.0)), Some(CellIndex::new(1, 2)));
        let cell = g.geometry().index(CellIndex::new(1, 2));
        assert_eq!(g.cell_counts(cell), &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(g.cell_total(cell), 1);
    }

    #[test]
    fn opposite_headings() {
        let mut g = grid();
        g.accumulate(&obs(0.2, 0.2, 0.0));
        g.accumulate(&obs(0.7, 0.9, PI));
        assert_eq!(g.cell_counts(0), &[1, 0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn outside_and_headingless_are_skipped() {
        let mut g = grid();
        assert_eq!(g.accumulate(&obs(-1.0, 0.0, 0.0)), None);
        assert_eq!(g.skipped(), 1);
        assert!(g.counts().iter().all(|&c| c == 0));
        let mut no_heading = obs(0.5, 0.5, 0.0);
        no_heading.delta = None;
        g.accumulate(&no_heading);
        assert_eq!(g.skipped(), 2);
        assert_eq!(g.total_observations(), 0);
    }

    #[test]
    fn merge_identity_and_mismatch() {
        let mut a = grid();
        a.accumulate(&obs(0.5, 0.5, 1.0));
        a.accumulate(&obs(3.5, 2.5, 4.0));
        let empty = grid();
        assert_eq!(CountGrid::merge(&a, &empty).unwrap(), a);
        let other = CountGrid::new(GridGeometry::new(4, 4, 1.0, 0.0, 0.0).unwrap(), BinningSpec::default());
        assert!(matches!(CountGrid::merge(&a, &other), Err(Error::GeometryMismatch(_))));
        let other = CountGrid::new(*a.geometry(), BinningSpec::centered(4).unwrap());
        assert!(CountGrid::merge(&a, &other).is_err());
    }

    #[test]
    fn from_counts_recomputes_totals() {
        let g = CountGrid::from_counts(
            GridGeometry::new(1, 1, 1.0, 0.0, 0.0).unwrap(),
            BinningSpec::centered(4).unwrap(),
            vec![1, 2, 3, 4],
            5,
        )
        .unwrap();
        assert_eq!(g.cell_total(0), 10);
        assert_eq!(g.skipped(), 5);
    }
}
