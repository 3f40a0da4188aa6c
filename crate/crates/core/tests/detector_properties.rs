use dcusum_core::{Detector, DetectorKind, SensorGraph, WeightMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(n: usize, seed: u64) -> WeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 1 {
        return WeightMatrix::uniform(1).unwrap();
    }
    let g = SensorGraph::random_connected(n, 0.3, &mut rng).unwrap();
    let cap = 1.0 / (g.max_degree() as f64 + 1.0);
    let mut w = DMatrix::zeros(n, n);
    for (i, j) in g.edges() {
        let x = rng.gen_range(0.05..1.0) * cap;
        w[(i, j)] = x;
        w[(j, i)] = x;
    }
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - s;
    }
    WeightMatrix::new(g, w).unwrap()
}

fn llr_path(n: usize, steps: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), steps)
}

fn scenario() -> impl Strategy<Value = (usize, u64, Vec<Vec<f64>>)> {
    (1usize..=10, any::<u64>()).prop_flat_map(|(n, seed)| (Just(n), Just(seed), llr_path(n, 200)))
}

/// Stopping time of a reference scalar CUSUM fed `llrs`.
fn scalar_cusum(llrs: impl Iterator<Item = f64>, b: f64) -> Option<u64> {
    let mut y = 0.0f64;
    for (t, l) in llrs.enumerate() {
        y = (y + l).max(0.0);
        if y >= b {
            return Some(t as u64 + 1);
        }
    }
    None
}

fn stop_time(d: &Detector, path: &[Vec<f64>]) -> Option<u64> {
    let mut s = d.initial_state(path[0].len()).unwrap();
    for l in path {
        if let Some(a) = d.step(&mut s, l).unwrap() {
            return Some(a.time);
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn consensus_conserves_mass_and_keeps_y_nonnegative((n, seed, path) in scenario()) {
        let d = Detector::new(DetectorKind::consensus(random_matrix(n, seed)), f64::MAX).unwrap();
        let mut s = d.initial_state(n).unwrap();
        for l in &path {
            d.step(&mut s, l).unwrap();
            let sy: f64 = s.y().iter().sum();
            let sz: f64 = s.z().iter().sum();
            prop_assert!((sz - sy).abs() <= 1e-9 * (1.0 + sy.abs()));
            prop_assert!(s.y().iter().all(|&y| y >= 0.0));
        }
    }

    #[test]
    fn stopping_time_nondecreasing_in_threshold(
        (n, seed, path) in scenario(),
        b1 in 0.01f64..20.0,
        db in 0.0f64..20.0,
    ) {
        for kind in [
            DetectorKind::consensus(random_matrix(n, seed)),
            DetectorKind::OneShot,
            DetectorKind::Centralized,
        ] {
            let low = stop_time(&Detector::new(kind.clone(), b1).unwrap(), &path);
            let high = stop_time(&Detector::new(kind, b1 + db).unwrap(), &path);
            match (low, high) {
                (Some(a), Some(b)) => prop_assert!(a <= b),
                (None, Some(_)) => prop_assert!(false, "higher threshold stopped earlier"),
                _ => {}
            }
        }
    }

    #[test]
    fn one_shot_is_first_local_alarm((n, _seed, path) in scenario(), b in 0.1f64..10.0) {
        let local = (0..n).filter_map(|v| scalar_cusum(path.iter().map(|l| l[v]), b)).min();
        let d = Detector::new(DetectorKind::OneShot, b).unwrap();
        prop_assert_eq!(stop_time(&d, &path), local);
    }

    #[test]
    fn centralized_is_cusum_sum_against_threshold((n, _seed, path) in scenario(), b in 0.1f64..30.0) {
        let mut y = vec![0.0f64; n];
        let mut expect = None;
        for (t, l) in path.iter().enumerate() {
            for v in 0..n {
                y[v] = (y[v] + l[v]).max(0.0);
            }
            if y.iter().sum::<f64>() >= b {
                expect = Some(t as u64 + 1);
                break;
            }
        }
        let d = Detector::new(DetectorKind::Centralized, b).unwrap();
        prop_assert_eq!(stop_time(&d, &path), expect);
    }

    #[test]
    fn single_sensor_kinds_coincide(path in llr_path(1, 300), b in 0.0f64..8.0) {
        let b = b.max(1e-9);
        let expect = scalar_cusum(path.iter().map(|l| l[0]), b);
        for kind in [
            DetectorKind::consensus(WeightMatrix::uniform(1).unwrap()),
            DetectorKind::OneShot,
            DetectorKind::Centralized,
        ] {
            prop_assert_eq!(stop_time(&Detector::new(kind, b).unwrap(), &path), expect);
        }
    }
}
