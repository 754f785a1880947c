mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seedpart::benchgen::{generate_gn_with, sample_benchmarks, GnParams, SeedCount};
use seedpart::tsos::{run_tsos, AffinitySource, Delta, StatsPopulation, TsosConfig};
use seedpart::Origin;

fn karate_run(cfg: &TsosConfig) -> seedpart::tsos::TsosResult {
    let (g, labels) = common::karate();
    let s = common::karate_seeds(&g, &labels);
    run_tsos(
        &g,
        AffinitySource::Betweenness,
        &s,
        cfg,
        Some(&labels.classes),
    )
    .unwrap()
}

#[test]
fn karate_stage_one_leaves_the_sparse_side_behind() {
    let r = karate_run(&TsosConfig::default());
    let first = r.stages[0].accuracy.unwrap();
    assert!((first - 64.7059).abs() < 1e-3, "stage 1 at {first}");
    assert!(r.final_accuracy().unwrap() >= first);
}

#[test]
fn karate_expansion_promotes_seed_neighbours() {
    let r = karate_run(&TsosConfig::default());
    let promoted = &r.stages[1].promoted;
    for id in [6, 7, 30] {
        assert!(promoted.contains(&id), "{id} missing from {promoted:?}");
    }
}

#[test]
fn infinite_delta_matches_a_single_stage() {
    let staged = karate_run(&TsosConfig {
        delta: Delta::Fixed(f64::INFINITY),
        ..TsosConfig::default()
    });
    let single = karate_run(&TsosConfig {
        stages: 1,
        ..TsosConfig::default()
    });
    assert_eq!(staged.labels, single.labels);
    assert!(staged.stages.iter().skip(1).all(|s| s.promoted.is_empty()));
}

#[test]
fn labelled_population_is_stricter_on_karate() {
    let all = karate_run(&TsosConfig::default());
    let labelled = karate_run(&TsosConfig {
        population: StatsPopulation::Labelled,
        ..TsosConfig::default()
    });
    assert!(labelled.stages[1].promoted.len() <= all.stages[1].promoted.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn benchmark_sets_only_grow(seed: u64, stages in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = GnParams { nk: 16, z_in: 6.0, z_out: 2.0, ..GnParams::default() };
        let (g, truth) = generate_gn_with(&params, &mut rng).unwrap();
        let s0 = sample_benchmarks(&truth, params.k, SeedCount::Fraction(0.06), 1, &mut rng).unwrap();
        let cfg = TsosConfig { stages, ..TsosConfig::default() };
        let r = run_tsos(&g, AffinitySource::Betweenness, &s0, &cfg, Some(&truth)).unwrap();
        let counts: Vec<usize> = r.stages.iter().map(|s| s.benchmark_counts.iter().sum()).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
        for i in 0..g.node_count() {
            if let Some(c) = s0.class_of(i) {
                prop_assert_eq!(r.benchmarks.class_of(i), Some(c));
                prop_assert_eq!(r.benchmarks.origin(i), Some(Origin::Initial));
                prop_assert_eq!(r.labels[i], c);
            }
        }
    }
}
