//! Random walks driven by a known map, giving every inference path a
//! ground truth to recover.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binning::BinningSpec;
use crate::directional::{DirectionalGrid, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{CellIndex, GridGeometry};
use crate::gridmap::OccupancyGrid;
use crate::ingest::{Observation, ObservationSet};
use crate::scalar::Probability;

/// Extra draws allowed when the sampled move is blocked.
pub const MAX_RESAMPLES: usize = 8;

/// Generator for walker `index`. ChaCha8 streams are stable across rand_chacha
/// releases, so a seed reproduces the same walks.
pub fn walker_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index)
}

fn sample_bin<T: Probability>(rng: &mut ChaCha8Rng, probs: &[T]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.to_f64_lossless();
        if p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    last_nonzero
}

fn neighbour(binning: &BinningSpec, bin: usize) -> (isize, isize) {
    let a = binning.center(bin);
    (a.cos().round() as isize, a.sin().round() as isize)
}

fn step_target(geometry: &GridGeometry, from: CellIndex, (dx, dy): (isize, isize)) -> Option<CellIndex> {
    if dx == 0 && dy == 0 {
        return None;
    }
    let col = from.col as isize + dx;
    let row = from.row as isize + dy;
    if col < 0 || row < 0 || col >= geometry.width as isize || row >= geometry.height as isize {
        return None;
    }
    Some(CellIndex::new(col as usize, row as usize))
}

/// Samples `n_walkers` walks of up to `steps_per_walker` observations each.
///
/// Walkers start on a uniformly drawn free cell (occupancy < 0.5). Each step
/// draws a heading bin from the current cell's distribution and emits an
/// observation at the cell center with the bin-center heading. The walker
/// then moves to the neighbouring cell in that direction; when that cell is
/// occupied or off the map, the move direction is redrawn up to
/// [`MAX_RESAMPLES`] times before the walker stops. Emitted headings are always
/// the first draw, so they are exact samples of the cell distribution.
///
/// Output is ordered by walker then step; `person_id` is the walker index and
/// `t` the step index.
pub fn sample_walks<T: Probability, U: Probability>(
    model: &DirectionalGrid<T>,
    occupancy: &OccupancyGrid<U>,
    n_walkers: usize,
    steps_per_walker: usize,
    seed: u64,
) -> Result<ObservationSet> {
    let geometry = *model.geometry();
    geometry.ensure_same(occupancy.geometry())?;
    let binning = *model.binning();
    let free: Vec<CellIndex> = (0..geometry.cell_count())
        .map(|i| geometry.cell_at(i))
        .filter(|c| occupancy.is_free(*c))
        .collect();
    if free.is_empty() {
        return Err(Error::NoFreeCells);
    }
    let moves: Vec<(isize, isize)> = (0..binning.k()).map(|b| neighbour(&binning, b)).collect();
    let open = |c: CellIndex, bin: usize| step_target(&geometry, c, moves[bin]).filter(|t| occupancy.is_free(*t));

    let mut observations = Vec::with_capacity(n_walkers * steps_per_walker);
    for walker in 0..n_walkers {
        let mut rng = walker_rng(seed, walker as u64);
        let mut cell = free[rng.random_range(0..free.len())];
        for step in 0..steps_per_walker {
            let probs = model.cell_at(cell);
            let bin = sample_bin(&mut rng, probs);
            let (x, y) = geometry.cell_center(cell);
            observations.push(Observation {
                person_id: walker as i64,
                t: step as f64,
                x,
                y,
                delta: Some(binning.center(bin)),
            });
            let mut next = open(cell, bin);
            let mut tries = 0;
            while next.is_none() && tries < MAX_RESAMPLES {
                next = open(cell, sample_bin(&mut rng, probs));
                tries += 1;
            }
            match next {
                Some(c) => cell = c,
                None => break,
            }
        }
    }
    Ok(ObservationSet::new(format!("synthetic(seed={seed})"), observations))
}

/// Map whose cells are independent draws from a flat Dirichlet.
pub fn random_model<T: Probability>(geometry: GridGeometry, binning: BinningSpec, seed: u64) -> DirectionalGrid<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = binning.k();
    let mut probs = Vec::with_capacity(geometry.cell_count() * k);
    for _ in 0..geometry.cell_count() {
        let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|v| T::from_f64_lossy(v / s)));
    }
    DirectionalGrid::from_parts_unchecked(geometry, binning, probs, Provenance::Prior)
}
