use markov_llt_core::kernel::fourier_operator;
use markov_llt_core::spectral::{
    alpha_grid, dominant_decomposition, eigenvalue_product, geometric_fit, nonarithmetic_scan, spectral_radius,
};
use markov_llt_core::{CMat, Complex64, Error, GeneratorModel, Observable, PropagatorConfig};

fn two_state() -> (GeneratorModel, Observable) {
    (GeneratorModel::symmetric_two_state(1.0), Observable::constant(&[vec![1.0, -1.0]]).unwrap())
}

/// For `G = [[-1, 1], [1, -1]]` and `b = (1, -1)` the eigenvalues of
/// `G + i t diag(b)` are `−1 ± √(1 − t²)`. For `|t| > 1` they share a
/// modulus and no dominant eigenvalue exists.
#[test]
fn two_state_eigenvalue_closed_form() {
    let (m, b) = two_state();
    let q = fourier_operator(&m, &b, &[1.5], 0.5, 0.5, &PropagatorConfig::default()).unwrap();
    assert!(matches!(dominant_decomposition(&q.matrix), Err(Error::GapTooSmall { .. })));
    for t in [0.0, 0.3, 0.6, 0.9] {
        let q = fourier_operator(&m, &b, &[t], 0.5, 0.5, &PropagatorConfig::default()).unwrap();
        let dec = dominant_decomposition(&q.matrix).unwrap();
        let root = Complex64::new(1.0 - t * t, 0.0).sqrt();
        let oracle = (Complex64::new(-1.0, 0.0) + root).exp();
        assert!((dec.lambda - oracle).norm() < 1e-12, "t = {t}");
        assert!(dec.reconstruction_error(&q.matrix) < 1e-12);
        // Normalisations: ⟨φ, v⟩ = 1 and ‖v‖∞ = 1.
        let pairing: Complex64 = dec.phi.iter().zip(&dec.v).map(|(a, b)| a * b).sum();
        assert!((pairing - 1.0).norm() < 1e-12);
        assert!((dec.v.iter().map(|z| z.norm()).fold(0.0, f64::max) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn degenerate_spectrum_is_rejected() {
    let m = CMat::identity(3);
    assert!(matches!(dominant_decomposition(&m), Err(Error::GapTooSmall { .. })));
    assert_eq!(spectral_radius(&m).unwrap(), 1.0);
}

#[test]
fn scan_passes_on_reference_and_fails_on_zero() {
    let (m, b) = two_state();
    let grid: Vec<Vec<f64>> = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0].iter().map(|&t| vec![t]).collect();
    let cfg = PropagatorConfig::default();
    let ok = nonarithmetic_scan(&m, &b, &grid, &alpha_grid(5), 1e-4, &cfg).unwrap();
    assert!(ok.passed() && ok.sanity_ok());
    let zero = Observable::zero(1, 2);
    let bad = nonarithmetic_scan(&m, &zero, &grid, &alpha_grid(5), 1e-4, &cfg).unwrap();
    assert!(!bad.passed());
    assert!(bad.sanity_ok());
}

#[test]
fn eigenvalue_product_of_frozen_observable_is_a_power() {
    let (m, b) = two_state();
    let cfg = PropagatorConfig::default();
    let single = fourier_operator(&m, &b, &[0.1], 0.0, 0.0, &cfg).unwrap();
    let lambda = dominant_decomposition(&single.matrix).unwrap().lambda;
    let prod = eigenvalue_product(&m, &b, &[0.1], 12.0, &cfg).unwrap();
    assert!((prod - lambda.powu(12)).norm() < 1e-12);
}

#[test]
fn geometric_fit_recovers_exact_rates() {
    let ks: Vec<f64> = (10..=40).map(f64::from).collect();
    let ys: Vec<f64> = ks.iter().map(|k| 3.0 * 0.7f64.powf(*k)).collect();
    let fit = geometric_fit(&ks, &ys).unwrap();
    assert!((fit.rate - 0.7).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!(geometric_fit(&ks[..1], &ys[..1]).is_err());
}
