#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bff_core::format::read_bff1;
use bff_core::gridmap::write_map;
use bff_core::ingest::write_canonical;
use bff_core::synthgen::random_model;
use bff_core::{BinningSpec, FlowMap, GridGeometry, ObservationSet, OccupancyMap};

pub fn bff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bff")).args(args).output().expect("run bff")
}

pub fn bff_ok(args: &[&str]) -> String {
    let out = bff(args);
    assert!(
        out.status.success(),
        "bff {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Free `width x height` map at 1 m/cell with its origin at (0, 0).
pub fn open_world(dir: &Path, width: usize, height: usize) -> (PathBuf, OccupancyMap) {
    let occ = OccupancyMap::filled(GridGeometry::new(width, height, 1.0, 0.0, 0.0).unwrap(), 0.0).unwrap();
    let sidecar = write_map(&occ, &dir.join("world.pgm")).unwrap();
    (sidecar, occ)
}

/// Random ground truth plus walks on an open map; returns the trajectory CSV.
pub fn synthetic_dataset(
    dir: &Path,
    occ: &OccupancyMap,
    seed: u64,
    walkers: usize,
    steps: usize,
) -> (PathBuf, FlowMap, ObservationSet) {
    let truth: FlowMap = random_model(*occ.geometry(), BinningSpec::default(), seed);
    let set = bff_core::sample_walks(&truth, occ, walkers, steps, seed).unwrap();
    let path = dir.join(format!("traj_{seed}.csv"));
    write_canonical(&set, &path).unwrap();
    (path, truth, set)
}

pub fn probs(path: &Path) -> Vec<f32> {
    read_bff1(path).unwrap().probs
}
