//! Frequentist floor fields and their Dirichlet-posterior fusion with a prior.
//!
//! With counts `q` over `k` headings (`N = sum q`), a prior cell vector `p`
//! and concentration `alpha`, the posterior over the cell's categorical
//! parameter is `Dir(q + alpha * p)` and its mean is
//! `(q_i + alpha * p_i) / (N + alpha)`. `alpha = 0` recovers the floor field.

use crate::counts::CountGrid;
use crate::directional::{DirectionalGrid, Provenance};
use crate::error::{Error, Result};
use crate::scalar::Probability;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    alpha: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams { alpha: 5.0 }
    }
}

impl FusionParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(FusionParams { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Posterior mean of one cell. Fails on `alpha = 0` with no observations,
/// where callers should use the uniform distribution instead.
pub fn posterior_mean<T: Probability>(counts: &[u64], prior: &[T], alpha: f64) -> Result<Vec<T>> {
    if counts.len() != prior.len() {
        return Err(Error::InvalidParameter(format!("{} counts vs {} prior entries", counts.len(), prior.len())));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 && alpha == 0.0 {
        return Err(Error::UndefinedPosterior);
    }
    Ok(posterior_cell(counts, prior, n, alpha))
}

#[inline]
fn posterior_cell<T: Probability>(counts: &[u64], prior: &[T], n: u64, alpha: f64) -> Vec<T> {
    if n == 0 {
        // alpha * p / alpha is p, but not bitwise in floating point
        return prior.to_vec();
    }
    let denom = n as f64 + alpha;
    counts
        .iter()
        .zip(prior)
        .map(|(&q, p)| T::from_f64_lossy((q as f64 + alpha * p.to_f64_lossless()) / denom))
        .collect()
}

/// Normalized counts per cell; cells without observations are uniform.
pub fn floor_field<T: Probability>(counts: &CountGrid) -> DirectionalGrid<T> {
    let k = counts.k();
    let uniform = T::from_f64_lossy(1.0 / k as f64);
    let mut probs = Vec::with_capacity(counts.counts().len());
    for cell in 0..counts.geometry().cell_count() {
        let n = counts.cell_total(cell);
        if n == 0 {
            probs.extend(std::iter::repeat_n(uniform, k));
        } else {
            probs.extend(counts.cell_counts(cell).iter().map(|&q| T::from_f64_lossy(q as f64 / n as f64)));
        }
    }
    DirectionalGrid::from_parts_unchecked(*counts.geometry(), *counts.binning(), probs, Provenance::FloorField)
}

/// Posterior-mean map fusing `prior` with `counts`.
///
/// With `alpha = 0`, unvisited cells fall back to uniform, so the result
/// equals [`floor_field`].
pub fn build_bff<T: Probability>(
    counts: &CountGrid,
    prior: &DirectionalGrid<T>,
    params: FusionParams,
) -> Result<DirectionalGrid<T>> {
    prior.ensure_compatible(counts.geometry(), counts.binning())?;
    let k = counts.k();
    let alpha = params.alpha();
    let uniform = T::from_f64_lossy(1.0 / k as f64);
    let mut probs = Vec::with_capacity(counts.counts().len());
    for cell in 0..counts.geometry().cell_count() {
        let n = counts.cell_total(cell);
        if n == 0 && alpha == 0.0 {
            probs.extend(std::iter::repeat_n(uniform, k));
        } else {
            probs.extend(posterior_cell(counts.cell_counts(cell), prior.cell(cell), n, alpha));
        }
    }
    Ok(DirectionalGrid::from_parts_unchecked(*counts.geometry(), *counts.binning(), probs, Provenance::Bayesian))
}
