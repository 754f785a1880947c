use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seedpart::benchgen::{
    generate_gn, run_trials, sample_benchmarks, trial_rng, BenchSpec, GnParams, SeedCount,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sampling_honours_the_class_minimum(seed: u64, k in 1usize..6, size in 3usize..20, min in 1usize..3, extra in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut truth: Vec<usize> = (0..k * size).map(|i| i % k).collect();
        for i in (1..truth.len()).rev() {
            truth.swap(i, rng.gen_range(0..=i));
        }
        let total = k * min + extra;
        prop_assume!(total <= truth.len());
        let s = sample_benchmarks(&truth, k, SeedCount::Count(total), min, &mut rng).unwrap();
        prop_assert_eq!(s.len(), total);
        prop_assert!(s.counts().iter().all(|&c| c >= min));
        for (i, &t) in truth.iter().enumerate() {
            if let Some(c) = s.class_of(i) {
                prop_assert_eq!(c, t);
            }
        }
    }

    #[test]
    fn gn_graphs_are_reproducible(seed: u64) {
        let p = GnParams { nk: 8, z_in: 4.0, z_out: 1.0, seed, ..GnParams::default() };
        let (a, la) = generate_gn(&p).unwrap();
        let (b, lb) = generate_gn(&p).unwrap();
        prop_assert_eq!(la, lb);
        prop_assert_eq!(a.edges(), b.edges());
    }
}

#[test]
fn trial_streams_are_independent_of_order() {
    let a: Vec<u64> = (0..4).map(|t| trial_rng(9, t).gen()).collect();
    let b: Vec<u64> = (0..4).rev().map(|t| trial_rng(9, t).gen()).collect();
    assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    assert_ne!(a[0], a[1]);
}

#[test]
fn trial_reports_do_not_depend_on_thread_count() {
    let spec = BenchSpec::from_toml(
        "name = \"small\"\nk = 3\nnk = 16\nzin = 6.0\nzout = 2.0\nseed_fraction = 0.1\ntrials = 6\nseed = 4\n",
        std::path::Path::new("."),
    )
    .unwrap();
    let one = run_trials(&spec, Some(1)).unwrap();
    let many = run_trials(&spec, Some(4)).unwrap();
    assert_eq!(one.to_json().unwrap(), many.to_json().unwrap());
    assert_eq!(one.to_csv(), many.to_csv());
    assert_eq!(one.trials.len(), 6);
    assert!(one.failures == 0);
}
