//! `bff`: build, fuse and evaluate floor-field maps of dynamics.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use bff_core::evaluate;
use bff_core::format::{self, Annotations};
use bff_core::ingest::{self, AdapterConfig, ObservationSet, ParseMode};
use bff_core::{
    build_bff, floor_field, gridmap, priors, synthgen, traindata, BinningSpec, CountGrid, DirectionalGrid,
    Error as CoreError, FusionParams, GridGeometry, OccupancyMap,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "bff", version, about = "Bayesian floor-field maps of dynamics")]
struct Cli {
    /// Print machine-readable statistics as JSON on stdout.
    #[arg(long, global = true)]
    json_stats: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Floor field from trajectories.
    BuildFf {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        traj: TrajArgs,
        #[arg(long)]
        out: PathBuf,
        /// Count sidecar path (default: `<out>.bffc`).
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Posterior-mean map fusing a prior with trajectories.
    BuildBff {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        traj: TrajArgs,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long, default_value_t = 5.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Likelihood of the full dataset while the model grows chunk by chunk.
    Curve {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        traj: TrajArgs,
        #[command(flatten)]
        prior: PriorArgs,
        /// Plain floor field instead of a posterior.
        #[arg(long, conflicts_with_all = ["prior", "uniform_prior"])]
        no_prior: bool,
        #[arg(long, default_value_t = 5.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2000)]
        chunk: usize,
        /// Curve CSV output.
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG chart.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Average likelihood of trajectories under a stored model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        traj: TrajArgs,
    },
    /// Likelihood of trajectories under their own floor field.
    UpperBound {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        traj: TrajArgs,
    },
    /// Per-cell arrows as CSV, or SVG when `--out` ends in `.svg`.
    ExportQuiver {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        min_prob: f64,
        /// Occupancy map drawn under the arrows (SVG only).
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Export (occupancy window, floor-field target) pairs as BFFT.
    MakeTrainingData {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        traj: TrajArgs,
        /// Window sample spacing (default: the grid resolution).
        #[arg(long)]
        window_resolution: Option<f64>,
        #[arg(long, default_value_t = traindata::DEFAULT_MIN_COUNT)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample synthetic walks from a model as canonical CSV.
    Synth {
        #[command(flatten)]
        grid: GridArgs,
        /// Ground-truth model (BFF1); omit to draw a random one.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Where to store the random ground-truth model.
        #[arg(long)]
        model_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        walkers: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Map sidecar (`.yaml`) or image with a sidecar of the same stem.
    #[arg(long)]
    map: PathBuf,
    /// Cell size of the map of dynamics, in metres.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Start of bin 0 in radians (default: -pi/k, bins centered on neighbours).
    #[arg(long, allow_hyphen_values = true)]
    bin_offset: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrajFormat {
    Canonical,
    Atc,
}

#[derive(Args)]
struct TrajArgs {
    #[arg(long, num_args = 1.., required = true)]
    traj: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "canonical")]
    format: TrajFormat,
    /// Adapter layout (TOML) for `--format atc`.
    #[arg(long)]
    atc_config: Option<PathBuf>,
    /// Abort on malformed rows instead of skipping them.
    #[arg(long)]
    strict: bool,
    /// Minimum displacement for derived headings, in metres.
    #[arg(long, default_value_t = ingest::DEFAULT_MIN_STEP)]
    min_step: f64,
}

#[derive(Args)]
struct PriorArgs {
    /// Prior map (BFF1).
    #[arg(long, conflicts_with = "uniform_prior")]
    prior: Option<PathBuf>,
    #[arg(long)]
    uniform_prior: bool,
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<CoreError>() {
            Some(
                CoreError::AllSkipped { .. }
                | CoreError::GeometryMismatch(_)
                | CoreError::InvalidDistribution { .. }
                | CoreError::NoFreeCells,
            ) => 2,
            _ => 1,
        };
        Failure { code, error }
    }
}

fn validation(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

type CmdResult = Result<(), Failure>;

#[derive(Serialize, Default)]
struct Stats {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    observations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counted: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    visited_cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entries: Option<usize>,
}

impl Stats {
    fn emit(&self, json: bool) {
        if json {
            println!("{}", serde_json::to_string(self).expect("stats serialize"));
            return;
        }
        let mut parts = Vec::new();
        if let (Some(w), Some(h)) = (self.width, self.height) {
            parts.push(format!("grid {w}x{h}"));
        }
        for (name, v) in [
            ("observations", self.observations.map(|v| v as u64)),
            ("counted", self.counted),
            ("skipped", self.skipped),
            ("visited cells", self.visited_cells.map(|v| v as u64)),
            ("pairs", self.pairs.map(|v| v as u64)),
            ("entries", self.entries.map(|v| v as u64)),
        ] {
            if let Some(v) = v {
                parts.push(format!("{name} {v}"));
            }
        }
        if let Some(l) = self.likelihood {
            parts.push(format!("likelihood {l}"));
        }
        println!("{}", parts.join(", "));
    }
}

fn binning(grid: &GridArgs) -> anyhow::Result<BinningSpec> {
    Ok(match grid.bin_offset {
        Some(offset) => BinningSpec::new(grid.k, offset)?,
        None => BinningSpec::centered(grid.k)?,
    })
}

fn load_map(path: &Path) -> anyhow::Result<OccupancyMap> {
    gridmap::load_map(path).with_context(|| format!("loading map {}", path.display()))
}

/// MoD geometry over the map extent, or the fallback geometry when no
/// resolution is given.
fn mod_geometry(map: &OccupancyMap, grid: &GridArgs, fallback: Option<&GridGeometry>) -> anyhow::Result<GridGeometry> {
    match (grid.resolution, fallback) {
        (Some(r), _) => Ok(map.geometry().rescaled(r)?),
        (None, Some(g)) => Ok(*g),
        (None, None) => bail!("--resolution is required"),
    }
}

fn load_trajectories(args: &TrajArgs) -> anyhow::Result<ObservationSet> {
    let mode = if args.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let cfg = match &args.atc_config {
        Some(p) => AdapterConfig::load(p)?,
        None => AdapterConfig::default(),
    };
    let mut all = ObservationSet::new(
        args.traj.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("+"),
        Vec::new(),
    );
    for path in &args.traj {
        let mut set = match args.format {
            TrajFormat::Canonical => ingest::parse_canonical(path, mode),
            TrajFormat::Atc => ingest::parse_atc(path, &cfg, mode),
        }
        .with_context(|| format!("reading {}", path.display()))?;
        if set.missing_headings() > 0 {
            log::info!("{}: deriving headings from positions", path.display());
            set = ingest::derive_headings(&set, args.min_step);
        }
        all.extend(set);
    }
    if all.rejected_rows > 0 {
        log::warn!("{} malformed rows skipped", all.rejected_rows);
    }
    Ok(all)
}

fn accumulate(geometry: GridGeometry, binning: BinningSpec, set: &ObservationSet) -> Result<CountGrid, Failure> {
    let mut counts = CountGrid::new(geometry, binning);
    counts.accumulate_all(set);
    if set.is_empty() {
        log::warn!("no trajectory observations; the map falls back to its prior/uniform cells");
    } else if counts.total_observations() == 0 {
        return Err(validation(anyhow!(
            "all {} observations fall outside the map or lack a heading; check map and trajectory frames",
            set.len()
        )));
    } else if counts.skipped() > 0 {
        log::warn!("{} observations skipped", counts.skipped());
    }
    Ok(counts)
}

fn count_stats(command: &'static str, set: &ObservationSet, counts: &CountGrid) -> Stats {
    Stats {
        command,
        width: Some(counts.geometry().width),
        height: Some(counts.geometry().height),
        observations: Some(set.len()),
        counted: Some(counts.total_observations()),
        skipped: Some(counts.skipped()),
        visited_cells: Some(counts.visited_cells()),
        ..Stats::default()
    }
}

enum PriorChoice {
    File(DirectionalGrid<f64>),
    Uniform,
    None,
}

fn prior_choice(args: &PriorArgs, allow_none: bool) -> anyhow::Result<PriorChoice> {
    match (&args.prior, args.uniform_prior) {
        (Some(p), _) => {
            let (grid, report) = priors::load_prior::<f64>(p).with_context(|| format!("loading prior {}", p.display()))?;
            if report.repaired_cells > 0 {
                log::warn!("prior {}: {} cells renormalized", p.display(), report.repaired_cells);
            }
            Ok(PriorChoice::File(grid))
        }
        (None, true) => Ok(PriorChoice::Uniform),
        (None, false) if allow_none => Ok(PriorChoice::None),
        (None, false) => bail!("one of --prior or --uniform-prior is required"),
    }
}

fn resolve_prior(
    choice: PriorChoice,
    map: &OccupancyMap,
    grid: &GridArgs,
) -> Result<(GridGeometry, BinningSpec, Option<DirectionalGrid<f64>>), Failure> {
    match choice {
        PriorChoice::File(p) => {
            let geometry = mod_geometry(map, grid, Some(p.geometry()))?;
            p.ensure_compatible(&geometry, &binning(grid)?)?;
            let b = *p.binning();
            Ok((geometry, b, Some(p)))
        }
        PriorChoice::Uniform => {
            let geometry = mod_geometry(map, grid, None)?;
            let b = binning(grid)?;
            Ok((geometry, b, Some(priors::uniform_prior(geometry, b))))
        }
        PriorChoice::None => Ok((mod_geometry(map, grid, None)?, binning(grid)?, None)),
    }
}

fn run(cli: Cli) -> CmdResult {
    let json = cli.json_stats;
    match cli.command {
        Command::BuildFf { grid, traj, out, counts } => {
            let map = load_map(&grid.map)?;
            let geometry = mod_geometry(&map, &grid, None)?;
            let set = load_trajectories(&traj)?;
            let c = accumulate(geometry, binning(&grid)?, &set)?;
            let ff: DirectionalGrid<f64> = floor_field(&c);
            format::write_bff1(&ff, &Annotations::new(), &out)?;
            let counts_path = counts.unwrap_or_else(|| out.with_extension("bffc"));
            format::write_counts(&c, &counts_path)?;
            count_stats("build-ff", &set, &c).emit(json);
        }
        Command::BuildBff { grid, traj, prior, alpha, out } => {
            let params = FusionParams::new(alpha)?;
            let map = load_map(&grid.map)?;
            let (geometry, b, prior) = resolve_prior(prior_choice(&prior, false)?, &map, &grid)?;
            let prior = prior.expect("a prior is required for build-bff");
            let set = load_trajectories(&traj)?;
            let c = accumulate(geometry, b, &set)?;
            let post = build_bff(&c, &prior, params)?;
            let mut notes = Annotations::new();
            notes.insert("alpha".into(), alpha.to_string());
            format::write_bff1(&post, &notes, &out)?;
            count_stats("build-bff", &set, &c).emit(json);
        }
        Command::Curve { grid, traj, prior, no_prior, alpha, chunk, out, svg } => {
            let params = FusionParams::new(alpha)?;
            let map = load_map(&grid.map)?;
            let label = match (&prior.prior, prior.uniform_prior) {
                (Some(p), _) => p.display().to_string(),
                (None, true) => "uniform".to_string(),
                (None, false) => "none".to_string(),
            };
            let (geometry, b, prior) = resolve_prior(prior_choice(&prior, no_prior)?, &map, &grid)?;
            if prior.is_none() && !no_prior {
                return Err(anyhow!("choose --prior, --uniform-prior or --no-prior").into());
            }
            let set = load_trajectories(&traj)?;
            let mut curve = evaluate::likelihood_curve(prior.as_ref(), &set, geometry, b, params, chunk)?;
            curve.meta.prior = label;
            std::fs::write(&out, curve.to_csv()).with_context(|| format!("writing {}", out.display()))?;
            if let Some(svg) = svg {
                std::fs::write(&svg, plot::curve_svg(&curve)).with_context(|| format!("writing {}", svg.display()))?;
            }
            Stats {
                command: "curve",
                observations: Some(set.len()),
                skipped: Some(curve.meta.skipped as u64),
                likelihood: curve.points.last().map(|p| p.1),
                ..Stats::default()
            }
            .emit(json);
        }
        Command::Eval { model, traj } => {
            let m = format::read_directional::<f64>(&model).with_context(|| format!("loading {}", model.display()))?;
            let set = load_trajectories(&traj)?;
            let r = evaluate::dataset_likelihood(&m, &set.observations)?;
            report_likelihood("eval", &r, set.len(), json);
        }
        Command::UpperBound { grid, traj } => {
            let map = load_map(&grid.map)?;
            let geometry = mod_geometry(&map, &grid, None)?;
            let set = load_trajectories(&traj)?;
            let r = evaluate::upper_bound(&set, geometry, binning(&grid)?)?;
            report_likelihood("upper-bound", &r, set.len(), json);
        }
        Command::ExportQuiver { model, out, min_prob, map } => {
            let m = format::read_directional::<f64>(&model).with_context(|| format!("loading {}", model.display()))?;
            let entries = plot::quiver_entries(&m, min_prob);
            let is_svg = out.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("svg"));
            let text = if is_svg {
                let underlay = map.as_deref().map(load_map).transpose()?;
                plot::quiver_svg(&m, &entries, underlay.as_ref())
            } else {
                plot::quiver_csv(&entries)
            };
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            Stats { command: "export-quiver", entries: Some(entries.len()), ..Stats::default() }.emit(json);
        }
        Command::MakeTrainingData { grid, traj, window_resolution, min_count, out } => {
            let map = load_map(&grid.map)?;
            let geometry = mod_geometry(&map, &grid, None)?;
            let set = load_trajectories(&traj)?;
            let c = accumulate(geometry, binning(&grid)?, &set)?;
            let gold: DirectionalGrid<f64> = floor_field(&c);
            let n = traindata::export_pairs(&map, &gold, &c, window_resolution.unwrap_or(geometry.resolution), min_count, &out)?;
            Stats { pairs: Some(n), ..count_stats("make-training-data", &set, &c) }.emit(json);
        }
        Command::Synth { grid, model, model_out, seed, walkers, steps, out } => {
            let map = load_map(&grid.map)?;
            let truth: DirectionalGrid<f64> = match &model {
                Some(p) => format::read_directional(p).with_context(|| format!("loading {}", p.display()))?,
                None => synthgen::random_model(mod_geometry(&map, &grid, None)?, binning(&grid)?, seed),
            };
            let occupancy = map.resample_to(truth.geometry());
            let set = synthgen::sample_walks(&truth, &occupancy, walkers, steps, seed)?;
            ingest::write_canonical(&set, &out)?;
            if let Some(p) = model_out {
                format::write_bff1(&truth, &Annotations::new(), &p)?;
            }
            Stats { command: "synth", observations: Some(set.len()), ..Stats::default() }.emit(json);
        }
    }
    Ok(())
}

fn report_likelihood(command: &'static str, r: &evaluate::LikelihoodReport, n: usize, json: bool) {
    if !json && r.skipped > 0 {
        eprintln!("{} of {} observations skipped (outside the map or without heading)", r.skipped, n);
    }
    Stats {
        command,
        observations: Some(n),
        counted: Some(r.scored as u64),
        skipped: Some(r.skipped as u64),
        likelihood: Some(r.mean),
        ..Stats::default()
    }
    .emit(json);
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
