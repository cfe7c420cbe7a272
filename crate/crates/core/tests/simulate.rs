use markov_llt_core::simulate::{integrate_s, integrate_s_rho, sample_path, PathSample};
use markov_llt_core::{GeneratorModel, Observable};
use proptest::prelude::*;

fn three_state() -> GeneratorModel {
    GeneratorModel::from_rates(3, &[(0, 1, 2.0), (1, 2, 1.0), (2, 0, 1.5), (1, 0, 0.5)]).unwrap()
}

/// Midpoint rule on a fine grid, with the grid split at every jump so
/// each cell sees a single state.
fn riemann(path: &PathSample, b: &Observable, rho: f64, horizon: f64) -> f64 {
    let end = (1.0 - rho) * horizon;
    let mut total = 0.0;
    for k in 0..path.states.len() {
        let lo = path.times[k];
        if lo >= end {
            break;
        }
        let hi = path.times.get(k + 1).copied().unwrap_or(end).min(end);
        let cells = 64;
        let h = (hi - lo) / cells as f64;
        for i in 0..cells {
            let s = lo + (i as f64 + 0.5) * h;
            total += h * b.evaluate(rho + s / horizon, path.states[k]).unwrap()[0];
        }
    }
    total
}

#[test]
fn exact_integral_matches_riemann_oracle() {
    let m = three_state();
    let b = Observable::new(1, 3, &[vec![vec![1.0, -2.0, 1.5], vec![0.0, 1.0], vec![-0.5, 0.0, 0.0, 2.0]]]).unwrap();
    let path = sample_path(&m, 40.0, 1, 11).unwrap();
    let exact = integrate_s(&path, &b, 40.0).unwrap()[0];
    assert!((exact - riemann(&path, &b, 0.0, 40.0)).abs() < 1e-6 * exact.abs().max(1.0));
    let exact = integrate_s_rho(&path, &b, 0.3, 40.0).unwrap()[0];
    assert!((exact - riemann(&path, &b, 0.3, 40.0)).abs() < 1e-6 * exact.abs().max(1.0));
}

#[test]
fn occupation_law_of_large_numbers() {
    let m = three_state();
    let path = sample_path(&m, 20_000.0, 0, 5).unwrap();
    let occ = path.occupation(3);
    for (o, p) in occ.iter().zip(m.nu()) {
        assert!((o / 20_000.0 - p).abs() < 0.02);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn paths_are_well_formed(seed in any::<u64>(), horizon in 1.0f64..200.0, x0 in 0usize..3) {
        let p = sample_path(&three_state(), horizon, x0, seed).unwrap();
        prop_assert_eq!(p.times[0], 0.0);
        prop_assert_eq!(p.states[0], x0);
        prop_assert!(p.times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(*p.times.last().unwrap() < horizon);
        prop_assert!(p.states.windows(2).all(|w| w[0] != w[1]));
        prop_assert_eq!(p.state_at(horizon), p.final_state());
    }

    #[test]
    fn s_is_linear_in_the_observable(seed in any::<u64>(), c in -3.0f64..3.0) {
        let p = sample_path(&three_state(), 25.0, 0, seed).unwrap();
        let b = Observable::new(1, 3, &[vec![vec![1.0, 1.0], vec![-1.0], vec![0.5, 0.0, -1.0]]]).unwrap();
        let s = integrate_s(&p, &b, 25.0).unwrap()[0];
        let sc = integrate_s(&p, &b.scaled(c), 25.0).unwrap()[0];
        prop_assert!((sc - c * s).abs() < 1e-10 * (1.0 + s.abs()));
    }
}
