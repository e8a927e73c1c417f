//! Prior maps: the uninformed uniform prior and precomputed (network) priors
//! loaded from BFF1 with a bounded renormalization repair.

use std::path::Path;

use crate::binning::BinningSpec;
use crate::directional::{check_cell, DirectionalGrid, Provenance, SIMPLEX_TOLERANCE};
use crate::error::{Error, Result};
use crate::format::{self, Annotations, RawDirectional};
use crate::geometry::GridGeometry;
use crate::scalar::Probability;

/// Cells whose sum is within this distance of 1 (and with no negative
/// entries) are renormalized on load; anything worse is rejected.
pub const REPAIR_TOLERANCE: f64 = 1e-2;

pub fn uniform_prior<T: Probability>(geometry: GridGeometry, binning: BinningSpec) -> DirectionalGrid<T> {
    DirectionalGrid::uniform(geometry, binning)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadReport {
    /// Cells that were renormalized.
    pub repaired_cells: usize,
}

/// Validates and, where needed, renormalizes a raw grid.
pub fn validate_prior<T: Probability>(raw: RawDirectional) -> Result<(DirectionalGrid<T>, LoadReport)> {
    let k = raw.binning.k();
    let mut report = LoadReport::default();
    let mut probs: Vec<T> = Vec::with_capacity(raw.probs.len());
    for (cell, v) in raw.probs.chunks_exact(k).enumerate() {
        let sum = check_cell(cell, v).map_err(|e| match e {
            Error::InvalidDistribution { cell, reason } => {
                Error::InvalidDistribution { cell, reason: format!("{reason} (not repairable)") }
            }
            other => other,
        })?;
        if (sum - 1.0).abs() <= SIMPLEX_TOLERANCE {
            probs.extend(v.iter().map(|p| T::from_f64_lossy(*p as f64)));
        } else if (sum - 1.0).abs() <= REPAIR_TOLERANCE {
            report.repaired_cells += 1;
            probs.extend(v.iter().map(|p| T::from_f64_lossy(*p as f64 / sum)));
        } else {
            return Err(Error::InvalidDistribution {
                cell,
                reason: format!("sums to {sum}, beyond repair tolerance {REPAIR_TOLERANCE}"),
            });
        }
    }
    let grid = DirectionalGrid::from_probs(raw.geometry, raw.binning, probs, Provenance::Prior)?;
    Ok((grid, report))
}

/// Loads a precomputed prior. Repaired cells are reported and logged.
pub fn load_prior<T: Probability>(path: &Path) -> Result<(DirectionalGrid<T>, LoadReport)> {
    let (grid, report) = validate_prior(format::read_bff1(path)?)?;
    if report.repaired_cells > 0 {
        log::warn!("{}: renormalized {} prior cells", path.display(), report.repaired_cells);
    }
    Ok((grid, report))
}

pub fn write_prior<T: Probability>(grid: &DirectionalGrid<T>, path: &Path) -> Result<()> {
    format::write_bff1(grid, &Annotations::new(), path)
}
