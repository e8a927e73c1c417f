//! Average heading likelihood of a dataset under a map, dataset upper bounds
//! and the chunked likelihood-versus-data curve.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::binning::BinningSpec;
use crate::counts::CountGrid;
use crate::directional::DirectionalGrid;
use crate::error::{Error, Result};
use crate::fusion::{build_bff, floor_field, FusionParams};
use crate::geometry::GridGeometry;
use crate::ingest::{Observation, ObservationSet};
use crate::scalar::Probability;

/// Probability the map assigns to the observed heading in the observation's
/// cell; `None` when the observation is outside the map or has no heading.
pub fn point_likelihood<T: Probability>(model: &DirectionalGrid<T>, obs: &Observation) -> Option<T> {
    let bin = model.binning().bin(obs.delta?).ok()?;
    let cell = model.geometry().world_to_cell(obs.x, obs.y).ok()?;
    Some(model.cell_at(cell)[bin])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodReport {
    /// Mean point likelihood over scored observations.
    pub mean: f64,
    pub scored: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct PartialSum {
    sum: f64,
    scored: usize,
    skipped: usize,
}

impl PartialSum {
    fn over<T: Probability>(model: &DirectionalGrid<T>, observations: &[Observation]) -> Self {
        let mut acc = PartialSum::default();
        for obs in observations {
            match point_likelihood(model, obs) {
                Some(p) => {
                    acc.sum += p.to_f64_lossless();
                    acc.scored += 1;
                }
                None => acc.skipped += 1,
            }
        }
        acc
    }

    fn finish(self) -> Result<LikelihoodReport> {
        if self.scored == 0 {
            return Err(Error::AllSkipped { skipped: self.skipped });
        }
        Ok(LikelihoodReport { mean: self.sum / self.scored as f64, scored: self.scored, skipped: self.skipped })
    }
}

pub fn dataset_likelihood<T: Probability>(
    model: &DirectionalGrid<T>,
    observations: &[Observation],
) -> Result<LikelihoodReport> {
    PartialSum::over(model, observations).finish()
}

/// Same as [`dataset_likelihood`], summing contiguous shards on scoped threads.
pub fn dataset_likelihood_parallel<T: Probability>(
    model: &DirectionalGrid<T>,
    observations: &[Observation],
    threads: usize,
) -> Result<LikelihoodReport> {
    let threads = threads.max(1);
    let shard = observations.len().div_ceil(threads).max(1);
    let partials: Vec<PartialSum> = std::thread::scope(|s| {
        let handles: Vec<_> = observations.chunks(shard).map(|c| s.spawn(move || PartialSum::over(model, c))).collect();
        handles.into_iter().map(|h| h.join().expect("likelihood worker panicked")).collect()
    });
    partials
        .into_iter()
        .fold(PartialSum::default(), |a, b| PartialSum {
            sum: a.sum + b.sum,
            scored: a.scored + b.scored,
            skipped: a.skipped + b.skipped,
        })
        .finish()
}

/// Likelihood of a dataset under the floor field built from that same dataset.
pub fn upper_bound(set: &ObservationSet, geometry: GridGeometry, binning: BinningSpec) -> Result<LikelihoodReport> {
    let mut counts = CountGrid::new(geometry, binning);
    counts.accumulate_all(set);
    let gold: DirectionalGrid<f64> = floor_field(&counts);
    dataset_likelihood(&gold, &set.observations)
}

/// Map built from `observations`: the posterior with `prior`, or the floor
/// field when there is no prior.
pub fn build_model<T: Probability>(
    prior: Option<&DirectionalGrid<T>>,
    observations: &[Observation],
    geometry: GridGeometry,
    binning: BinningSpec,
    params: FusionParams,
) -> Result<DirectionalGrid<T>> {
    let mut counts = CountGrid::new(geometry, binning);
    counts.accumulate_all(observations);
    model_from_counts(prior, &counts, params)
}

fn model_from_counts<T: Probability>(
    prior: Option<&DirectionalGrid<T>>,
    counts: &CountGrid,
    params: FusionParams,
) -> Result<DirectionalGrid<T>> {
    match prior {
        Some(p) => build_bff(counts, p, params),
        None => Ok(floor_field(counts)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveMeta {
    pub prior: String,
    /// `None` for the prior-free floor-field curve.
    pub alpha: Option<f64>,
    pub chunk: usize,
    pub dataset: String,
    /// Evaluation-set observations that could not be scored.
    pub skipped: usize,
    pub upper_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveResult {
    /// `(n, L)` with `n` strictly increasing.
    pub points: Vec<(usize, f64)>,
    pub meta: CurveMeta,
}

/// Grows the model on prefixes `0, chunk, 2*chunk, ...` (plus the full set
/// when its length is not a multiple) of `set`, scoring each against the
/// whole set. Counts are accumulated incrementally between steps.
pub fn likelihood_curve<T: Probability>(
    prior: Option<&DirectionalGrid<T>>,
    set: &ObservationSet,
    geometry: GridGeometry,
    binning: BinningSpec,
    params: FusionParams,
    chunk_size: usize,
) -> Result<CurveResult> {
    if chunk_size == 0 {
        return Err(Error::InvalidParameter("chunk size must be at least 1".into()));
    }
    if let Some(p) = prior {
        p.ensure_compatible(&geometry, &binning)?;
    }
    let mut counts = CountGrid::new(geometry, binning);
    let mut points = Vec::new();
    let mut n = 0;
    loop {
        let model = model_from_counts(prior, &counts, params)?;
        let report = dataset_likelihood(&model, &set.observations)?;
        points.push((n, report.mean));
        if n >= set.len() {
            break;
        }
        let next = (n + chunk_size).min(set.len());
        counts.accumulate_all(&set.observations[n..next]);
        n = next;
    }
    let upper = upper_bound(set, geometry, binning)?;
    Ok(CurveResult {
        points,
        meta: CurveMeta {
            prior: prior.map(|p| p.provenance().to_string()).unwrap_or_else(|| "none".into()),
            alpha: prior.map(|_| params.alpha()),
            chunk: chunk_size,
            dataset: set.source.clone(),
            skipped: upper.skipped,
            upper_bound: Some(upper.mean),
        },
    })
}

impl CurveResult {
    /// `# key: value` header lines followed by an `n,L` table.
    pub fn to_csv(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "# prior: {}", m.prior);
        let _ = writeln!(out, "# alpha: {}", m.alpha.map(|a| a.to_string()).unwrap_or_else(|| "none".into()));
        let _ = writeln!(out, "# chunk: {}", m.chunk);
        let _ = writeln!(out, "# dataset: {}", m.dataset);
        let _ = writeln!(out, "# skipped: {}", m.skipped);
        let _ = writeln!(out, "# upper_bound: {}", m.upper_bound.map(|u| u.to_string()).unwrap_or_else(|| "none".into()));
        out.push_str("n,L\n");
        for (n, l) in &self.points {
            let _ = writeln!(out, "{n},{l}");
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let bad = |line: u64, reason: String| Error::MalformedRow { line, reason };
        let mut meta = CurveMeta {
            prior: String::new(),
            alpha: None,
            chunk: 0,
            dataset: String::new(),
            skipped: 0,
            upper_bound: None,
        };
        let mut points = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i as u64 + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let Some((key, value)) = rest.split_once(':') else { continue };
                let value = value.trim();
                let opt = |v: &str| -> Result<Option<f64>> {
                    if v == "none" {
                        Ok(None)
                    } else {
                        v.parse().map(Some).map_err(|e| bad(lineno, format!("{v}: {e}")))
                    }
                };
                match key.trim() {
                    "prior" => meta.prior = value.to_string(),
                    "alpha" => meta.alpha = opt(value)?,
                    "chunk" => meta.chunk = value.parse().map_err(|e| bad(lineno, format!("chunk: {e}")))?,
                    "dataset" => meta.dataset = value.to_string(),
                    "skipped" => meta.skipped = value.parse().map_err(|e| bad(lineno, format!("skipped: {e}")))?,
                    "upper_bound" => meta.upper_bound = opt(value)?,
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() || line.trim() == "n,L" {
                continue;
            }
            let (n, l) = line.split_once(',').ok_or_else(|| bad(lineno, "expected `n,L`".into()))?;
            points.push((
                n.trim().parse().map_err(|e| bad(lineno, format!("n: {e}")))?,
                l.trim().parse().map_err(|e| bad(lineno, format!("L: {e}")))?,
            ));
        }
        Ok(CurveResult { points, meta })
    }
}
