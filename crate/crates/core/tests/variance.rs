mod common;

use common::{generator_rows, green_kubo_oracle};
use markov_llt_core::variance::{
    corrector_solve, hessian_corrector, hessian_fd, hessian_green_kubo, lambda_gradient_check, sigma_on_interval,
    sigma_rho, sigma_rho_lipschitz, sigma_total, HessianRoute,
};
use markov_llt_core::{Error, GeneratorModel, Observable, ObservableFn, PropagatorConfig};

fn three_state() -> GeneratorModel {
    GeneratorModel::from_rates(3, &[(0, 1, 2.0), (1, 2, 1.0), (2, 0, 1.5), (1, 0, 0.5)]).unwrap()
}

fn two_dim(m: &GeneratorModel) -> Observable {
    Observable::new(
        2,
        3,
        &[
            vec![vec![1.0, 1.0], vec![0.0, -1.0], vec![-1.0]],
            vec![vec![0.0], vec![1.0], vec![-0.5]],
        ],
    )
    .unwrap()
    .center(m.nu())
    .unwrap()
}

fn rows_at(b: &Observable, alpha: f64) -> Vec<Vec<f64>> {
    let vals = b.eval_vec(alpha);
    let (d, n) = (b.dim(), b.num_states());
    (0..d).map(|j| (0..n).map(|x| vals[x * d + j]).collect()).collect()
}

#[test]
fn green_kubo_matches_poisson_oracle() {
    let m = three_state();
    let b = two_dim(&m);
    let g = generator_rows(&m);
    for alpha in [0.0, 0.37, 1.0] {
        let h = hessian_green_kubo(&m, &b, alpha).unwrap();
        let oracle = green_kubo_oracle(&g, &rows_at(&b, alpha));
        for j in 0..2 {
            for k in 0..2 {
                assert!((h[(j, k)] + oracle[j][k]).abs() < 1e-12, "α = {alpha} ({j}, {k})");
            }
        }
    }
}

#[test]
fn three_routes_agree() {
    let m = three_state();
    let b = two_dim(&m);
    let cfg = PropagatorConfig::default();
    for alpha in [0.1, 0.5, 0.9] {
        let gk = hessian_green_kubo(&m, &b, alpha).unwrap();
        let cor = hessian_corrector(&m, &b, alpha).unwrap();
        let fd = hessian_fd(&m, &b, alpha, 1e-3, &cfg).unwrap();
        assert!(gk.max_abs_diff(&cor) < 1e-9);
        assert!(gk.max_abs_diff(&fd) < 5e-4);
    }
}

#[test]
fn corrector_is_centered() {
    let m = three_state();
    let b = two_dim(&m);
    let c = corrector_solve(&m, &b, 0.4).unwrap();
    for j in 0..2 {
        let mean: f64 = (0..3).map(|x| m.nu()[x] * c.u[(j, x)]).sum();
        assert!(mean.abs() < 1e-13);
    }
}

#[test]
fn gradient_vanishes_at_origin() {
    let m = three_state();
    let b = two_dim(&m);
    let cfg = PropagatorConfig::default();
    for (a, z) in [(0.0, 0.0), (0.2, 0.9), (0.5, 0.5), (1.0, 1.0)] {
        for g in lambda_gradient_check(&m, &b, a, z, 1e-3, &cfg).unwrap() {
            assert!(g < 1e-5, "({a}, {z}): {g}");
        }
    }
    assert!(lambda_gradient_check(&m, &b, 0.0, 1.0, 0.1, &cfg).is_err());
}

#[test]
fn sigma_of_time_linear_observable() {
    let m = GeneratorModel::symmetric_two_state(1.0);
    let b = Observable::new(1, 2, &[vec![vec![0.0, 1.0], vec![0.0, -1.0]]]).unwrap();
    let s = sigma_total(&m, &b, 17).unwrap();
    assert!((s.cov[(0, 0)] - 1.0 / 3.0).abs() < 1e-8);
    let r = sigma_rho(&m, &b, 0.5, 17).unwrap();
    assert!((r.cov[(0, 0)] - (1.0 - 0.125) / 3.0).abs() < 1e-8);
    assert!((sigma_rho_lipschitz(&m, &b, 11).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn sigma_rho_halves_for_frozen_observable() {
    let m = GeneratorModel::symmetric_two_state(1.0);
    let b = Observable::constant(&[vec![1.0, -1.0]]).unwrap();
    let full = sigma_total(&m, &b, 17).unwrap();
    let half = sigma_rho(&m, &b, 0.5, 17).unwrap();
    assert!((full.cov[(0, 0)] - 1.0).abs() < 1e-12);
    assert!((half.cov[(0, 0)] - 0.5).abs() < 1e-12);
}

#[test]
fn quadrature_order_is_converged() {
    let m = three_state();
    let b = two_dim(&m);
    let cfg = PropagatorConfig::default();
    let a = sigma_on_interval(&m, &b, 0.0, 1.0, 17, HessianRoute::GreenKubo, &cfg).unwrap();
    let z = sigma_on_interval(&m, &b, 0.0, 1.0, 33, HessianRoute::GreenKubo, &cfg).unwrap();
    assert!(a.cov.max_abs_diff(&z.cov) < 1e-12);
    // Cholesky factor reproduces the covariance.
    assert!(a.factor.matmul(&a.factor.transpose()).max_abs_diff(&a.cov) < 1e-12);
}

#[test]
fn degenerate_observables_are_rejected() {
    let m = GeneratorModel::symmetric_two_state(1.0);
    let zero = Observable::zero(1, 2);
    assert!(matches!(sigma_total(&m, &zero, 17), Err(Error::NotPositiveDefinite { .. })));
    let uncentered = Observable::constant(&[vec![1.0, 0.0]]).unwrap();
    assert!(matches!(hessian_green_kubo(&m, &uncentered, 0.5), Err(Error::InvalidArgument(_))));
}
