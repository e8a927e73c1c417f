//! Maps of dynamics for pedestrian flow on occupancy grids.
//!
//! Floor fields are built by counting observed headings per cell; Bayesian
//! floor fields fuse those counts with a prior map through the Dirichlet
//! posterior mean. The crate also covers trajectory ingestion, the average
//! likelihood metric and its data-efficiency curve, synthetic walk
//! generation and training-pair export for prior networks.
//!
//! Probability payloads are generic over [`Probability`] (`f32` or `f64`);
//! the aliases below fix the common choices.

pub mod binning;
pub mod counts;
pub mod directional;
pub mod error;
pub mod evaluate;
pub mod format;
pub mod fusion;
pub mod geometry;
pub mod gridmap;
pub mod ingest;
pub mod priors;
pub mod scalar;
pub mod synthgen;
pub mod traindata;

pub use binning::{wrap_angle, BinningSpec};
pub use counts::CountGrid;
pub use directional::{DirectionalGrid, Provenance};
pub use error::{Error, Result};
pub use evaluate::{dataset_likelihood, likelihood_curve, point_likelihood, upper_bound, CurveResult, LikelihoodReport};
pub use fusion::{build_bff, floor_field, posterior_mean, FusionParams};
pub use geometry::{CellIndex, GridGeometry};
pub use gridmap::{load_map, load_occupancy, MapMetadata, OccupancyGrid, Window, WINDOW_SIZE};
pub use ingest::{Observation, ObservationSet};
pub use priors::{load_prior, uniform_prior, write_prior};
pub use scalar::Probability;
pub use synthgen::sample_walks;
pub use traindata::export_pairs;

/// Map of dynamics with `f64` probabilities.
pub type FlowMap = DirectionalGrid<f64>;
/// Map of dynamics with `f32` probabilities, matching the on-disk payload.
pub type FlowMap32 = DirectionalGrid<f32>;
/// Occupancy grid with `f64` values.
pub type OccupancyMap = OccupancyGrid<f64>;
/// Occupancy grid with `f32` values.
pub type OccupancyMap32 = OccupancyGrid<f32>;
