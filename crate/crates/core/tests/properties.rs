use std::f64::consts::TAU;

use bff_core::evaluate::{build_model, dataset_likelihood_parallel};
use bff_core::format::{read_bff1_from, write_bff1_to, Annotations};
use bff_core::ingest::{read_canonical, write_canonical_to, ParseMode};
use bff_core::synthgen::random_model;
use bff_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn geometry() -> GridGeometry {
    GridGeometry::new(12, 9, 0.5, -1.0, 2.0).unwrap()
}

/// Positions spill slightly past the grid so some observations are skipped.
fn random_stream(seed: u64, n: usize) -> ObservationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = (0..n)
        .map(|i| {
            Observation::new(
                (i / 10) as i64,
                i as f64,
                rng.random_range(-1.5..5.5),
                rng.random_range(1.5..7.0),
                rng.random_range(-10.0..10.0),
            )
        })
        .collect();
    ObservationSet::new("random", obs)
}

#[test]
fn split_and_merge_equals_single_pass() {
    let set = random_stream(1, 1000);
    let mut whole = CountGrid::new(geometry(), BinningSpec::default());
    whole.accumulate_all(&set);
    let (a, b) = set.observations.split_at(500);
    let mut left = CountGrid::new(geometry(), BinningSpec::default());
    left.accumulate_all(a);
    let mut right = CountGrid::new(geometry(), BinningSpec::default());
    right.accumulate_all(b);
    assert_eq!(CountGrid::merge(&left, &right).unwrap(), whole);
    assert_eq!(CountGrid::merge(&right, &left).unwrap(), whole);
    assert!(whole.skipped() > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_partition_gives_identical_posteriors(
        seed in any::<u64>(),
        cuts in proptest::collection::vec(0usize..600, 0..6),
    ) {
        let set = random_stream(seed, 600);
        let mut cuts = cuts;
        cuts.push(0);
        cuts.push(600);
        cuts.sort_unstable();
        let mut merged = CountGrid::new(geometry(), BinningSpec::default());
        for w in cuts.windows(2) {
            let mut part = CountGrid::new(geometry(), BinningSpec::default());
            part.accumulate_all(&set.observations[w[0]..w[1]]);
            merged.merge_from(&part).unwrap();
        }
        let mut whole = CountGrid::new(geometry(), BinningSpec::default());
        whole.accumulate_all(&set);
        prop_assert_eq!(&merged, &whole);
        let prior: FlowMap = random_model(geometry(), BinningSpec::default(), seed);
        let a = build_bff(&merged, &prior, FusionParams::default()).unwrap();
        let b = build_bff(&whole, &prior, FusionParams::default()).unwrap();
        prop_assert_eq!(a.probs(), b.probs());
    }

    #[test]
    fn merge_is_commutative_and_associative(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let grid = |s| {
            let mut c = CountGrid::new(geometry(), BinningSpec::default());
            c.accumulate_all(&random_stream(s, 200));
            c
        };
        let (a, b, c) = (grid(s1), grid(s2), grid(s3));
        prop_assert_eq!(CountGrid::merge(&a, &b).unwrap(), CountGrid::merge(&b, &a).unwrap());
        let left = CountGrid::merge(&CountGrid::merge(&a, &b).unwrap(), &c).unwrap();
        let right = CountGrid::merge(&a, &CountGrid::merge(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn builders_stay_on_the_simplex(seed in any::<u64>(), alpha in 0.0f64..50.0) {
        let set = random_stream(seed, 300);
        let mut counts = CountGrid::new(geometry(), BinningSpec::default());
        counts.accumulate_all(&set);
        let prior: FlowMap32 = random_model(geometry(), BinningSpec::default(), seed ^ 1);
        let ff: FlowMap32 = floor_field(&counts);
        let post = build_bff(&counts, &prior, FusionParams::new(alpha).unwrap()).unwrap();
        for grid in [&ff, &post, &prior] {
            for cell in grid.cells() {
                let s: f64 = cell.iter().map(|p| *p as f64).sum();
                prop_assert!((s - 1.0).abs() <= 1e-6);
                prop_assert!(cell.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }

    #[test]
    fn bff1_round_trip_bitwise(seed in any::<u64>(), w in 1usize..20, h in 1usize..20, k in 2usize..12) {
        let g = GridGeometry::new(w, h, 0.25 + (seed % 7) as f64 * 0.1, -3.5, 1.25).unwrap();
        let grid: FlowMap32 = random_model(g, BinningSpec::centered(k).unwrap(), seed);
        let mut buf = Vec::new();
        write_bff1_to(&grid, &Annotations::new(), &mut buf).unwrap();
        let raw = read_bff1_from(buf.as_slice()).unwrap();
        prop_assert_eq!(raw.geometry, *grid.geometry());
        prop_assert_eq!(raw.binning, *grid.binning());
        let bits: Vec<u32> = raw.probs.iter().map(|p| p.to_bits()).collect();
        let expected: Vec<u32> = grid.probs().iter().map(|p| p.to_bits()).collect();
        prop_assert_eq!(bits, expected);
    }

    #[test]
    fn canonical_csv_round_trip(
        rows in proptest::collection::vec(
            (any::<i64>(), -1e9f64..1e9, -1e4f64..1e4, -1e4f64..1e4, proptest::option::of(0.0f64..TAU)),
            0..50,
        )
    ) {
        let set = ObservationSet::new(
            "p",
            rows.iter().map(|&(person_id, t, x, y, delta)| Observation { person_id, t, x, y, delta }).collect(),
        );
        let mut buf = Vec::new();
        write_canonical_to(&set, &mut buf).unwrap();
        let back = read_canonical(buf.as_slice(), "p", ParseMode::Strict).unwrap();
        prop_assert_eq!(back.observations, set.observations);
    }

    #[test]
    fn likelihood_is_permutation_invariant(seed in any::<u64>()) {
        let set = random_stream(seed, 400);
        let model: FlowMap = random_model(geometry(), BinningSpec::default(), seed);
        let base = dataset_likelihood(&model, &set.observations).unwrap();
        let mut shuffled = set.observations.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let other = dataset_likelihood(&model, &shuffled).unwrap();
        prop_assert!((base.mean - other.mean).abs() <= 1e-12 * base.mean);
        prop_assert_eq!(base.skipped, other.skipped);
        prop_assert!((0.0..=1.0).contains(&base.mean));
        for threads in [2, 3, 8] {
            let par = dataset_likelihood_parallel(&model, &set.observations, threads).unwrap();
            prop_assert!((par.mean - base.mean).abs() <= 1e-12 * base.mean);
            prop_assert_eq!(par.scored, base.scored);
        }
    }
}

#[test]
fn incremental_curve_matches_rebuilds() {
    let occ = OccupancyMap::filled(GridGeometry::new(15, 15, 1.0, 0.0, 0.0).unwrap(), 0.0).unwrap();
    let truth: FlowMap = random_model(*occ.geometry(), BinningSpec::default(), 5);
    let set = sample_walks(&truth, &occ, 300, 20, 11).unwrap();
    let prior: FlowMap = random_model(*occ.geometry(), BinningSpec::default(), 6);
    for prior in [Some(&prior), None] {
        let curve = likelihood_curve(prior, &set, *occ.geometry(), BinningSpec::default(), FusionParams::default(), 700)
            .unwrap();
        assert_eq!(curve.points.last().unwrap().0, set.len());
        for (n, l) in &curve.points {
            let model = build_model(prior, set.prefix(*n), *occ.geometry(), BinningSpec::default(), FusionParams::default())
                .unwrap();
            assert_eq!(dataset_likelihood(&model, &set.observations).unwrap().mean, *l, "n = {n}");
        }
        let prior_only = match prior {
            Some(p) => dataset_likelihood(p, &set.observations).unwrap().mean,
            None => 0.125,
        };
        assert_eq!(curve.points[0], (0, prior_only));
    }
}

#[test]
fn large_counts_make_ff_and_bff_agree() {
    // every visited cell gets >= 10^4 observations
    let g = GridGeometry::new(4, 4, 1.0, 0.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let truth: FlowMap = random_model(g, BinningSpec::default(), 3);
    let mut obs = Vec::new();
    for cell in 0..g.cell_count() {
        let (x, y) = g.cell_center(g.cell_at(cell));
        for _ in 0..10_000 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let bin = truth.cell(cell).iter().position(|p| {
                acc += p;
                u < acc
            });
            let bin = bin.unwrap_or(7);
            obs.push(Observation::new(0, 0.0, x, y, BinningSpec::default().center(bin)));
        }
    }
    let set = ObservationSet::new("dense", obs);
    let prior: FlowMap = random_model(g, BinningSpec::default(), 4);
    let ff: FlowMap = build_model(None, &set.observations, g, BinningSpec::default(), FusionParams::default()).unwrap();
    let bff = build_model(Some(&prior), &set.observations, g, BinningSpec::default(), FusionParams::default()).unwrap();
    let lf = dataset_likelihood(&ff, &set.observations).unwrap().mean;
    let lb = dataset_likelihood(&bff, &set.observations).unwrap().mean;
    assert!((lf - lb).abs() <= 1e-3, "{lf} vs {lb}");
}
