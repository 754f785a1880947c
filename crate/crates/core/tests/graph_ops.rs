mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seedpart::io::{self, EdgeFormat};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn divergence_is_adjoint_of_difference(seed: u64, n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(&mut rng, n, 0.3, Some((0.1, 3.0)));
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let f: Vec<f64> = (0..g.edge_count()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let du = g.difference(&u).unwrap();
        let df = g.divergence(&f).unwrap();
        let lhs: f64 = du.iter().zip(&f).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&df).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn tv_norm_is_sum_of_abs_gradient(seed: u64, n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(&mut rng, n, 0.3, Some((0.1, 3.0)));
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let direct: f64 = g
            .edges()
            .iter()
            .map(|e| e.weight * (u[e.head] - u[e.tail]).abs())
            .sum();
        let tv = g.tv_norm(&u).unwrap();
        prop_assert!((tv - direct).abs() <= 1e-12 * (1.0 + direct));
        let grad: f64 = g.gradient(&u).unwrap().iter().map(|x| x.abs()).sum();
        prop_assert!((tv - grad).abs() <= 1e-12 * (1.0 + grad));
    }

    #[test]
    fn weighted_round_trip_is_bit_exact(seed: u64, n in 2usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(&mut rng, n, 0.4, Some((1e-6, 1e3)));
        prop_assume!(g.edge_count() > 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        io::write_graph(&g, &path).unwrap();
        let back = io::load_graph(&path, EdgeFormat::WeightedEdgeList).unwrap();
        prop_assert_eq!(back.edge_count(), g.edge_count());
        for e in g.edges() {
            let (a, b) = (g.external_id(e.tail), g.external_id(e.head));
            let (x, y) = (back.index_of(a).unwrap(), back.index_of(b).unwrap());
            prop_assert_eq!(back.weight_between(x, y).to_bits(), e.weight.to_bits());
        }
    }
}
