mod common;

use common::{generator_rows, max_diff, twisted_exp};
use markov_llt_core::kernel::{fourier_operator, nagaev_value, remainder_operator, unit_factors, PropagatorMethod};
use markov_llt_core::{Complex64, GeneratorModel, Observable, PropagatorConfig};
use proptest::prelude::*;

fn three_state() -> GeneratorModel {
    GeneratorModel::from_rates(3, &[(0, 1, 2.0), (1, 2, 1.0), (2, 0, 1.5), (1, 0, 0.5)]).unwrap()
}

fn time_dependent(m: &GeneratorModel) -> Observable {
    Observable::new(1, 3, &[vec![vec![1.0, 2.0], vec![0.0, -1.0, 0.5], vec![-1.0]]])
        .unwrap()
        .center(m.nu())
        .unwrap()
}

#[test]
fn frozen_observable_matches_matrix_exponential() {
    let m = three_state();
    let b = Observable::constant(&[vec![1.0, -0.5, 0.25]]).unwrap();
    let g = generator_rows(&m);
    for t in [-2.0, 0.3, 1.7] {
        let q = fourier_operator(&m, &b, &[t], 0.4, 0.4, &PropagatorConfig::default()).unwrap();
        let oracle = twisted_exp(&g, &[t, -0.5 * t, 0.25 * t]);
        assert!(max_diff(&q.matrix, &oracle) < 1e-12, "t = {t}");
    }
}

#[test]
fn zero_frequency_is_the_transition_matrix() {
    let m = three_state();
    let b = time_dependent(&m);
    let q = fourier_operator(&m, &b, &[0.0], 0.1, 0.6, &PropagatorConfig::default()).unwrap();
    let p = m.transition_matrix(1.0).unwrap().p.to_complex();
    assert!(q.matrix.max_abs_diff(&p) < 1e-13);
}

#[test]
fn conjugation_symmetry() {
    let m = three_state();
    let b = time_dependent(&m);
    let cfg = PropagatorConfig::default();
    let plus = fourier_operator(&m, &b, &[0.8], 0.2, 0.7, &cfg).unwrap();
    let minus = fourier_operator(&m, &b, &[-0.8], 0.2, 0.7, &cfg).unwrap();
    assert!(plus.matrix.conj().max_abs_diff(&minus.matrix) < 1e-14);
}

#[test]
fn resolution_and_method_stability() {
    let m = three_state();
    let b = time_dependent(&m);
    let coarse = fourier_operator(&m, &b, &[1.3], 0.0, 1.0, &PropagatorConfig::with_steps(64)).unwrap();
    let fine = fourier_operator(&m, &b, &[1.3], 0.0, 1.0, &PropagatorConfig::with_steps(1024)).unwrap();
    assert!(coarse.matrix.max_abs_diff(&fine.matrix) < 1e-9);
    let rk = PropagatorConfig {
        method: PropagatorMethod::Rk4,
        ..PropagatorConfig::with_steps(1024)
    };
    let rk = fourier_operator(&m, &b, &[1.3], 0.0, 1.0, &rk).unwrap();
    assert!(rk.matrix.max_abs_diff(&fine.matrix) < 1e-10);
    let checked = PropagatorConfig {
        refine_check: true,
        ..PropagatorConfig::default()
    };
    let q = fourier_operator(&m, &b, &[1.3], 0.0, 1.0, &checked).unwrap();
    assert!(q.refine_estimate.unwrap() < 1e-6);
}

#[test]
fn factor_count_and_remainder() {
    let m = three_state();
    let b = time_dependent(&m);
    let cfg = PropagatorConfig::default();
    assert_eq!(unit_factors(&m, &b, &[0.5], 7.0, &cfg).unwrap().len(), 7);
    assert_eq!(unit_factors(&m, &b, &[0.5], 7.75, &cfg).unwrap().len(), 7);
    let whole = remainder_operator(&m, &b, &[0.5], 7.0, &cfg).unwrap();
    assert_eq!(whole.step_count, 0);
    // At t = 0 the remainder is P(frac).
    let rem = remainder_operator(&m, &b, &[0.0], 7.75, &cfg).unwrap();
    let p = m.transition_matrix(0.75).unwrap().p.to_complex();
    assert!(rem.matrix.max_abs_diff(&p) < 1e-13);
    assert!(unit_factors(&m, &b, &[0.5], 0.5, &cfg).is_err());
}

#[test]
fn nagaev_value_at_zero_is_a_transition_expectation() {
    let m = three_state();
    let b = time_dependent(&m);
    let f = [1.0, -2.0, 0.5];
    let fc: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mu = [0.2, 0.3, 0.5];
    let v = nagaev_value(&m, &b, &[0.0], 10.25, &fc, &mu, &PropagatorConfig::default()).unwrap();
    let p = m.transition_matrix(10.25).unwrap().p;
    let oracle: f64 = p.vec_mul(&mu).iter().zip(&f).map(|(a, b)| a * b).sum();
    assert!((v - Complex64::new(oracle, 0.0)).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// |Q(t) f| ≤ Q(0)|f| entrywise, hence ‖Q(t)‖_∞ ≤ 1.
    #[test]
    fn domination_by_the_transition_kernel(t in -4.0f64..4.0, a in 0.0f64..1.0, len in 0.0f64..1.0) {
        let m = three_state();
        let b = time_dependent(&m);
        let beta = (a + len).min(1.0);
        let cfg = PropagatorConfig::default();
        let q = fourier_operator(&m, &b, &[t], a, beta, &cfg).unwrap();
        let p = m.transition_matrix(1.0).unwrap().p;
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!(q.matrix[(i, j)].norm() <= p[(i, j)] + 1e-12);
            }
        }
        prop_assert!(q.matrix.norm_inf() <= 1.0 + 1e-12);
    }
}
