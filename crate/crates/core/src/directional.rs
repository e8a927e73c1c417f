use std::fmt;
use std::str::FromStr;

use crate::binning::BinningSpec;
use crate::error::{Error, Result};
use crate::geometry::{CellIndex, GridGeometry};
use crate::scalar::Probability;

/// Tolerance on per-cell sums for a grid to count as valid.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// How a [`DirectionalGrid`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    FloorField,
    Bayesian,
    Prior,
    Uniform,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::FloorField => "floor_field",
            Provenance::Bayesian => "bayesian",
            Provenance::Prior => "prior",
            Provenance::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floor_field" => Ok(Provenance::FloorField),
            "bayesian" => Ok(Provenance::Bayesian),
            "prior" => Ok(Provenance::Prior),
            "uniform" => Ok(Provenance::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown provenance `{other}`"))),
        }
    }
}

/// Map of dynamics: a categorical heading distribution per cell.
///
/// Probabilities are stored row-major, direction index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalGrid<T: Probability> {
    geometry: GridGeometry,
    binning: BinningSpec,
    probs: Vec<T>,
    provenance: Provenance,
}

/// Checks one cell vector; returns its sum.
pub(crate) fn check_cell<T: Probability>(cell: usize, v: &[T]) -> Result<f64> {
    let mut sum = 0.0;
    for (i, p) in v.iter().enumerate() {
        let p = p.to_f64_lossless();
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution { cell, reason: format!("entry {i} = {p}") });
        }
        sum += p;
    }
    Ok(sum)
}

impl<T: Probability> DirectionalGrid<T> {
    pub fn from_probs(
        geometry: GridGeometry,
        binning: BinningSpec,
        probs: Vec<T>,
        provenance: Provenance,
    ) -> Result<Self> {
        let k = binning.k();
        if probs.len() != geometry.cell_count() * k {
            return Err(Error::InvalidGeometry(format!(
                "expected {} probabilities, got {}",
                geometry.cell_count() * k,
                probs.len()
            )));
        }
        for (cell, v) in probs.chunks_exact(k).enumerate() {
            let sum = check_cell(cell, v)?;
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::InvalidDistribution { cell, reason: format!("sums to {sum}") });
            }
        }
        Ok(DirectionalGrid { geometry, binning, probs, provenance })
    }

    /// Internal constructor for builders whose output is on the simplex by construction.
    pub(crate) fn from_parts_unchecked(
        geometry: GridGeometry,
        binning: BinningSpec,
        probs: Vec<T>,
        provenance: Provenance,
    ) -> Self {
        debug_assert_eq!(probs.len(), geometry.cell_count() * binning.k());
        DirectionalGrid { geometry, binning, probs, provenance }
    }

    /// Every cell `(1/k, ..., 1/k)`.
    pub fn uniform(geometry: GridGeometry, binning: BinningSpec) -> Self {
        let k = binning.k();
        let p = T::one() / T::from_usize(k).expect("k fits the scalar type");
        DirectionalGrid { geometry, binning, probs: vec![p; geometry.cell_count() * k], provenance: Provenance::Uniform }
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

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn cell(&self, index: usize) -> &[T] {
        let k = self.k();
        &self.probs[index * k..(index + 1) * k]
    }

    pub fn cell_at(&self, cell: CellIndex) -> &[T] {
        self.cell(self.geometry.index(cell))
    }

    pub fn cells(&self) -> impl Iterator<Item = &[T]> {
        self.probs.chunks_exact(self.k())
    }

    /// Converts the payload to another scalar type.
    pub fn cast<U: Probability>(&self) -> DirectionalGrid<U> {
        DirectionalGrid {
            geometry: self.geometry,
            binning: self.binning,
            probs: self.probs.iter().map(|p| U::from_f64_lossy(p.to_f64_lossless())).collect(),
            provenance: self.provenance,
        }
    }

    pub fn ensure_compatible(&self, geometry: &GridGeometry, binning: &BinningSpec) -> Result<()> {
        self.geometry.ensure_same(geometry)?;
        if self.binning.k() != binning.k() {
            return Err(Error::GeometryMismatch(format!("k = {} vs k = {}", self.binning.k(), binning.k())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> GridGeometry {
        GridGeometry::new(2, 1, 1.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn uniform_k8_and_k4() {
        let g: DirectionalGrid<f64> = DirectionalGrid::uniform(geom(), BinningSpec::default());
        assert!(g.probs().iter().all(|p| *p == 0.125));
        let g: DirectionalGrid<f32> = DirectionalGrid::uniform(geom(), BinningSpec::centered(4).unwrap());
        assert!(g.probs().iter().all(|p| *p == 0.25));
        assert_eq!(g.provenance(), Provenance::Uniform);
    }

    #[test]
    fn validation() {
        let b = BinningSpec::centered(2).unwrap();
        assert!(DirectionalGrid::from_probs(geom(), b, vec![0.5f64, 0.5, 1.0, 0.0], Provenance::Prior).is_ok());
        assert!(DirectionalGrid::from_probs(geom(), b, vec![0.5f64, 0.4, 1.0, 0.0], Provenance::Prior).is_err());
        assert!(DirectionalGrid::from_probs(geom(), b, vec![1.2f64, -0.2, 1.0, 0.0], Provenance::Prior).is_err());
        assert!(DirectionalGrid::from_probs(geom(), b, vec![1.0f64, 0.0], Provenance::Prior).is_err());
    }

    #[test]
    fn provenance_round_trip() {
        for p in [Provenance::FloorField, Provenance::Bayesian, Provenance::Prior, Provenance::Uniform] {
            assert_eq!(p.as_str().parse::<Provenance>().unwrap(), p);
        }
        assert!("nope".parse::<Provenance>().is_err());
    }
}
