//! Supervised (occupancy window, target distribution) pairs for training a
//! prior network.
//!
//! `BFFT` layout, little-endian:
//!
//! ```text
//! "BFFT" | u32 pair count | u32 window size (64) | u32 k | f64 window resolution
//! | per pair: 64*64 f32 occupancy (row 0 = min y) then k f32 target
//! | optional annotation block (min_count, resolution of the gold grid, ...)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::counts::CountGrid;
use crate::directional::DirectionalGrid;
use crate::error::{Error, Result};
use crate::format::{write_annotations, Annotations, LeReader};
use crate::gridmap::{OccupancyGrid, WINDOW_SIZE};
use crate::scalar::Probability;

pub const BFFT_MAGIC: &[u8; 4] = b"BFFT";

/// Minimum observations a cell needs to become a training pair.
pub const DEFAULT_MIN_COUNT: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    /// `WINDOW_SIZE * WINDOW_SIZE` occupancy values, row 0 = min y.
    pub window: Vec<f32>,
    pub target: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub window_resolution: f64,
    pub k: usize,
    pub pairs: Vec<TrainingPair>,
    pub annotations: Annotations,
}

/// Pairs for every cell of `gold` with at least `min_count` observations,
/// in row-major cell order. Windows are centered on the gold cell centers.
pub fn collect_pairs<T: Probability, U: Probability>(
    occupancy: &OccupancyGrid<U>,
    gold: &DirectionalGrid<T>,
    counts: &CountGrid,
    window_resolution: f64,
    min_count: u64,
) -> Result<Vec<TrainingPair>> {
    gold.ensure_compatible(counts.geometry(), counts.binning())?;
    let geometry = gold.geometry();
    let mut pairs = Vec::new();
    for cell in 0..geometry.cell_count() {
        if counts.cell_total(cell) < min_count.max(1) {
            continue;
        }
        let (x, y) = geometry.cell_center(geometry.cell_at(cell));
        let window = occupancy.extract_window(x, y, window_resolution)?;
        pairs.push(TrainingPair {
            window: window.values.iter().map(|v| v.to_f64_lossless() as f32).collect(),
            target: gold.cell(cell).iter().map(|p| p.to_f64_lossless() as f32).collect(),
        });
    }
    Ok(pairs)
}

pub fn write_bfft_to(set: &TrainingSet, w: &mut impl Write) -> Result<()> {
    let count = u32::try_from(set.pairs.len())
        .map_err(|_| Error::InvalidParameter("too many pairs for BFFT".into()))?;
    w.write_all(BFFT_MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&(WINDOW_SIZE as u32).to_le_bytes())?;
    w.write_all(&(set.k as u32).to_le_bytes())?;
    w.write_all(&set.window_resolution.to_le_bytes())?;
    let mut buf = Vec::with_capacity((WINDOW_SIZE * WINDOW_SIZE + set.k) * 4);
    for (i, pair) in set.pairs.iter().enumerate() {
        if pair.window.len() != WINDOW_SIZE * WINDOW_SIZE || pair.target.len() != set.k {
            return Err(Error::InvalidParameter(format!("pair {i} has the wrong shape")));
        }
        buf.clear();
        for v in pair.window.iter().chain(&pair.target) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    write_annotations(w, &set.annotations)
}

pub fn write_bfft(set: &TrainingSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_bfft_to(set, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_bfft_from(reader: impl Read) -> Result<TrainingSet> {
    let mut r = LeReader::new(reader, "BFFT");
    r.magic(BFFT_MAGIC)?;
    let count = r.u32("pair count")? as usize;
    let size = r.u32("window size")? as usize;
    if size != WINDOW_SIZE {
        return Err(r.fail(format!("window size {size}, expected {WINDOW_SIZE}")));
    }
    let k = r.u32("k")? as usize;
    if k < 2 {
        return Err(r.fail(format!("k = {k}")));
    }
    let window_resolution = r.f64("window resolution")?;
    let mut pairs = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let window = r.f32_vec(size * size, "window")?;
        let target = r.f32_vec(k, "target")?;
        pairs.push(TrainingPair { window, target });
    }
    let annotations = r.annotations()?;
    Ok(TrainingSet { window_resolution, k, pairs, annotations })
}

pub fn read_bfft(path: &Path) -> Result<TrainingSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_bfft_from(BufReader::new(file))
}

/// Writes the training pairs for `gold` to `out_path`; returns the pair count.
pub fn export_pairs<T: Probability, U: Probability>(
    occupancy: &OccupancyGrid<U>,
    gold: &DirectionalGrid<T>,
    counts: &CountGrid,
    window_resolution: f64,
    min_count: u64,
    out_path: &Path,
) -> Result<usize> {
    let pairs = collect_pairs(occupancy, gold, counts, window_resolution, min_count)?;
    let mut annotations = Annotations::new();
    annotations.insert("min_count".into(), min_count.to_string());
    annotations.insert("grid_resolution".into(), gold.geometry().resolution.to_string());
    annotations.insert("bin_offset".into(), gold.binning().offset().to_string());
    let n = pairs.len();
    write_bfft(&TrainingSet { window_resolution, k: gold.k(), pairs, annotations }, out_path)?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::BinningSpec;
    use crate::fusion::floor_field;
    use crate::geometry::GridGeometry;
    use crate::ingest::Observation;

    fn setup() -> (OccupancyGrid<f64>, CountGrid) {
        let geometry = GridGeometry::new(6, 5, 0.4, 0.0, 0.0).unwrap();
        let values: Vec<f64> = (0..30).map(|i| (i % 7) as f64 / 6.0).collect();
        let occ = OccupancyGrid::from_values(geometry, values).unwrap();
        let mut counts = CountGrid::new(geometry, BinningSpec::default());
        for (cell, n) in [(0usize, 1usize), (7, 5), (29, 12)] {
            let (x, y) = geometry.cell_center(geometry.cell_at(cell));
            for j in 0..n {
                counts.accumulate(&Observation::new(0, 0.0, x, y, j as f64));
            }
        }
        (occ, counts)
    }

    #[test]
    fn pair_counts_follow_threshold() {
        let (occ, counts) = setup();
        let gold: DirectionalGrid<f64> = floor_field(&counts);
        let n = |min| collect_pairs(&occ, &gold, &counts, 0.4, min).unwrap().len();
        assert_eq!(n(1), 3);
        assert_eq!(n(5), 2);
        assert_eq!(n(12), 1);
        assert_eq!(n(13), 0);
        let mut last = usize::MAX;
        for m in 0..20 {
            let c = n(m);
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn exported_pairs_are_valid_and_round_trip() {
        let (occ, counts) = setup();
        let gold: DirectionalGrid<f64> = floor_field(&counts);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.bfft");
        assert_eq!(export_pairs(&occ, &gold, &counts, 0.4, 1, &path).unwrap(), 3);
        let set = read_bfft(&path).unwrap();
        assert_eq!((set.pairs.len(), set.k, set.window_resolution), (3, 8, 0.4));
        assert_eq!(set.annotations.get("min_count").map(String::as_str), Some("1"));
        for p in &set.pairs {
            assert!(p.window.iter().all(|v| (0.0..=1.0).contains(v)));
            let s: f32 = p.target.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
        let bytes = std::fs::read(&path).unwrap();
        let mut again = Vec::new();
        write_bfft_to(&set, &mut again).unwrap();
        assert_eq!(bytes, again);
        assert!(read_bfft_from(&bytes[..bytes.len() / 2]).is_err());
    }

    #[test]
    fn rejects_wrong_window_size() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"BFFT");
        buf.extend_from_slice(&0u32.to_le_bytes());
        buf.extend_from_slice(&32u32.to_le_bytes());
        buf.extend_from_slice(&8u32.to_le_bytes());
        buf.extend_from_slice(&0.4f64.to_le_bytes());
        assert!(read_bfft_from(buf.as_slice()).is_err());
    }
}
