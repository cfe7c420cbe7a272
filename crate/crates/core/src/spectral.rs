//! Dominant eigentriples of Fourier operators and the spectral diagnostics
//! built on them.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{fourier_operator, unit_factors, PropagatorConfig};
use crate::linalg::{dot, eigenvalues, inverse_iteration, sup_norm, CMat};
use crate::model::GeneratorModel;
use crate::observable::ObservableFn;

/// Smallest admissible relative gap `(|λ₁| − |λ₂|)/|λ₁|`.
pub const MIN_RELATIVE_GAP: f64 = 1e-3;
/// Default tolerance of the non-arithmetic verdict.
pub const SCAN_TOLERANCE: f64 = 1e-6;
/// Default number of α points in a scan.
pub const DEFAULT_SCAN_ALPHAS: usize = 33;

/// `M = λ·v⊗φ + N` with `Nv = 0`, `φN = 0`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub lambda: Complex64,
    pub v: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    pub n: CMat,
    /// Spectral radius of `N`.
    pub remainder_radius: f64,
    /// `|λ| − r(N)`.
    pub gap: f64,
    /// `‖Mv − λv‖_∞`.
    pub residual: f64,
}

fn complement(v: &[Complex64], phi: &[Complex64]) -> CMat {
    let k = v.len();
    CMat::from_fn(k, k, |r, c| {
        let id = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        id - v[r] * phi[c]
    })
}

impl SpectralDecomposition {
    /// `‖M − λ·v⊗φ − N‖_∞` against the matrix it came from.
    pub fn reconstruction_error(&self, m: &CMat) -> f64 {
        let rebuilt = CMat::from_fn(m.nrows(), m.ncols(), |r, c| self.lambda * self.v[r] * self.phi[c] + self.n[(r, c)]);
        m.sub_mat(&rebuilt).norm_inf()
    }

    /// The projection `Π_H = I − v⊗φ` onto the complement of `v`.
    pub fn complement_projector(&self) -> CMat {
        complement(&self.v, &self.phi)
    }
}

fn sorted_by_modulus(mut eigs: Vec<Complex64>) -> Vec<Complex64> {
    eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    eigs
}

pub fn spectral_radius(m: &CMat) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Dominant eigenvalue, right eigenvector (phase fixed so `Σv > 0`, then
/// `‖v‖_∞ = 1`), left eigenvector with `⟨φ, v⟩ = 1`, and remainder.
pub fn dominant_decomposition(m: &CMat) -> Result<SpectralDecomposition> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let eigs = sorted_by_modulus(eigenvalues(m)?);
    let top = eigs[0];
    let top_mod = top.norm();
    let second = eigs.get(1).map_or(0.0, |z| z.norm());
    let relative_gap = if top_mod > 0.0 { (top_mod - second) / top_mod } else { 0.0 };
    if relative_gap < MIN_RELATIVE_GAP {
        return Err(Error::GapTooSmall {
            relative_gap,
            required: MIN_RELATIVE_GAP,
        });
    }

    let mut v = inverse_iteration(m, top)?;
    let total: Complex64 = v.iter().sum();
    let pivot = if total.norm() > 1e-8 * sup_norm(&v) {
        total
    } else {
        *v.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap()
    };
    let phase = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|z| *z *= phase);
    let vmax = sup_norm(&v);
    v.iter_mut().for_each(|z| *z /= vmax);

    let w = inverse_iteration(&m.transpose(), top)?;
    let pairing = dot(&w, &v);
    if pairing.norm() < 1e-12 * sup_norm(&w) {
        return Err(Error::NonConvergence { iterations: 4 });
    }
    let phi: Vec<Complex64> = w.iter().map(|z| z / pairing).collect();

    let mv = m.mul_vec(&v);
    let lambda = dot(&phi, &mv);
    let residual = mv.iter().zip(&v).map(|(a, b)| (a - lambda * b).norm()).fold(0.0, f64::max);

    let n = m.matmul(&complement(&v, &phi));
    let remainder_radius = spectral_radius(&n)?;
    Ok(SpectralDecomposition {
        lambda,
        v,
        phi,
        n,
        remainder_radius,
        gap: lambda.norm() - remainder_radius,
        residual,
    })
}

/// One cell of a non-arithmetic scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub t: Vec<f64>,
    pub alpha: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    /// Rows with `t ≠ 0`.
    pub rows: Vec<ScanRow>,
    /// `t = 0` rows, where the radius must be 1.
    pub sanity: Vec<ScanRow>,
    pub tolerance: f64,
}

impl ScanReport {
    pub fn max_radius(&self) -> f64 {
        self.rows.iter().map(|r| r.radius).fold(0.0, f64::max)
    }

    pub fn sanity_ok(&self) -> bool {
        self.sanity.iter().all(|r| (r.radius - 1.0).abs() <= 1e-8)
    }

    pub fn passed(&self) -> bool {
        self.sanity_ok() && self.rows.iter().all(|r| r.radius < 1.0 - self.tolerance)
    }
}

/// Equispaced α grid on `[0, 1]`.
pub fn alpha_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

/// `r(Q(t, α, α))` over `t_grid × alphas`, plus a `t = 0` sanity row per α.
pub fn nonarithmetic_scan<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t_grid: &[Vec<f64>],
    alphas: &[f64],
    tolerance: f64,
    cfg: &PropagatorConfig,
) -> Result<ScanReport> {
    let zero = vec![0.0; b.dim()];
    let mut rows = Vec::new();
    let mut sanity = Vec::new();
    for &alpha in alphas {
        let q = fourier_operator(model, b, &zero, alpha, alpha, cfg)?;
        sanity.push(ScanRow {
            t: zero.clone(),
            alpha,
            radius: spectral_radius(&q.matrix)?,
        });
    }
    for t in t_grid {
        if t.iter().all(|&c| c == 0.0) {
            continue;
        }
        for &alpha in alphas {
            let q = fourier_operator(model, b, t, alpha, alpha, cfg)?;
            rows.push(ScanRow {
                t: t.clone(),
                alpha,
                radius: spectral_radius(&q.matrix)?,
            });
        }
    }
    Ok(ScanReport {
        rows,
        sanity,
        tolerance,
    })
}

/// Magnitudes of the two remainder pieces in the product formula.
#[derive(Clone, Debug)]
pub struct ProductResidual {
    /// Component of the normalised remainder along `v(t, 0, 1/T)`.
    pub p: f64,
    /// Sup norm of the normalised remainder in the complement.
    pub q: f64,
    pub lambda_product: Complex64,
    pub product: Vec<Complex64>,
    pub leading: Vec<Complex64>,
}

/// Compares `∏_k Q(t, k/T, (k+1)/T) f` with its leading term
/// `∏λ_k · ∏⟨φ_k, v_{k+1}⟩ · ⟨φ_last, f⟩ · v_first`.
pub fn product_residual<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    horizon: f64,
    f: &[Complex64],
    cfg: &PropagatorConfig,
) -> Result<ProductResidual> {
    if f.len() != model.n() {
        return Err(Error::DimensionMismatch {
            what: "test function",
            expected: model.n(),
            actual: f.len(),
        });
    }
    let factors = unit_factors(model, b, t, horizon, cfg)?;
    let decs = factors
        .iter()
        .map(|q| dominant_decomposition(&q.matrix))
        .collect::<Result<Vec<_>>>()?;

    let mut product = f.to_vec();
    for q in factors.iter().rev() {
        product = q.matrix.mul_vec(&product);
    }

    let lambda_product: Complex64 = decs.iter().map(|d| d.lambda).product();
    let last = decs.last().expect("horizon ≥ 1 gives at least one factor");
    let mut coef = dot(&last.phi, f);
    for pair in decs.windows(2) {
        coef *= dot(&pair[0].phi, &pair[1].v);
    }
    let first = &decs[0];
    let leading: Vec<Complex64> = first.v.iter().map(|&vx| lambda_product * coef * vx).collect();

    let remainder: Vec<Complex64> = product.iter().zip(&leading).map(|(a, l)| (a - l) / lambda_product).collect();
    let along = dot(&first.phi, &remainder);
    let rest: Vec<Complex64> = remainder.iter().zip(&first.v).map(|(r, vx)| r - along * vx).collect();
    Ok(ProductResidual {
        p: along.norm(),
        q: sup_norm(&rest),
        lambda_product,
        product,
        leading,
    })
}

/// `∏_{k<⌊T⌋} λ(t, k/T, (k+1)/T)`.
pub fn eigenvalue_product<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    horizon: f64,
    cfg: &PropagatorConfig,
) -> Result<Complex64> {
    let mut acc = Complex64::new(1.0, 0.0);
    for q in unit_factors(model, b, t, horizon, cfg)? {
        acc *= dominant_decomposition(&q.matrix)?.lambda;
    }
    Ok(acc)
}

/// Least-squares fit `ln y_k ≈ a + k·ln r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn geometric_fit(ks: &[f64], values: &[f64]) -> Result<GeometricFit> {
    if ks.len() != values.len() || ks.len() < 2 {
        return Err(Error::InvalidArgument("geometric fit needs ≥ 2 paired samples".into()));
    }
    if values.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::InvalidArgument("geometric fit needs positive values".into()));
    }
    let ys: Vec<f64> = values.iter().map(|&y| libm::log(y)).collect();
    let m = ks.len() as f64;
    let kx = ks.iter().sum::<f64>() / m;
    let ky = ys.iter().sum::<f64>() / m;
    let sxx: f64 = ks.iter().map(|k| (k - kx) * (k - kx)).sum();
    let sxy: f64 = ks.iter().zip(&ys).map(|(k, y)| (k - kx) * (y - ky)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ky) * (y - ky)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("geometric fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(GeometricFit {
        rate: libm::exp(slope),
        intercept: ky - slope * kx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMat;
    use crate::observable::Observable;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn stochastic_two_state() {
        let model = GeneratorModel::symmetric_two_state(1.0);
        let p = model.transition_matrix(1.0).unwrap().p.to_complex();
        let dec = dominant_decomposition(&p).unwrap();
        let e2 = libm::exp(-2.0);
        assert!((dec.lambda - c(1.0)).norm() < 1e-12);
        for z in &dec.v {
            assert!((z - c(1.0)).norm() < 1e-12);
        }
        for z in &dec.phi {
            assert!((z - c(0.5)).norm() < 1e-12);
        }
        assert!((dec.remainder_radius - e2).abs() < 1e-12);
        assert!(dec.reconstruction_error(&p) < 1e-12);
        assert!((spectral_radius(&p).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_matrix() {
        let m = RMat::diag(&[0.5, 0.2]).to_complex();
        let dec = dominant_decomposition(&m).unwrap();
        assert!((dec.lambda - c(0.5)).norm() < 1e-14);
        assert!((dec.v[0] - c(1.0)).norm() < 1e-12 && dec.v[1].norm() < 1e-12);
        assert!((dec.phi[0] - c(1.0)).norm() < 1e-12 && dec.phi[1].norm() < 1e-12);
        assert!(dec.n.max_abs_diff(&RMat::diag(&[0.0, 0.2]).to_complex()) < 1e-12);
    }

    #[test]
    fn gap_too_small_and_nilpotent() {
        let m = RMat::diag(&[0.5, 0.49999]).to_complex();
        assert!(matches!(dominant_decomposition(&m), Err(Error::GapTooSmall { .. })));
        let nil = RMat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]).to_complex();
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
    }

    #[test]
    fn two_state_fourier_decomposition() {
        let model = GeneratorModel::symmetric_two_state(1.0);
        let b = Observable::constant(&[vec![1.0, -1.0]]).unwrap();
        let cfg = PropagatorConfig::default();
        let q = fourier_operator(&model, &b, &[0.1], 0.5, 0.5, &cfg).unwrap();
        let dec = dominant_decomposition(&q.matrix).unwrap();
        assert!(dec.reconstruction_error(&q.matrix) < 1e-8);
        assert!(sup_norm(&dec.n.mul_vec(&dec.v)) < 1e-8);
        assert!(sup_norm(&dec.n.vec_mul(&dec.phi)) < 1e-8);
        assert!((dot(&dec.phi, &dec.v) - c(1.0)).norm() < 1e-13);
        assert!((sup_norm(&dec.v) - 1.0).abs() < 1e-15);
        // exp of [[−1+it, 1], [1, −1−it]] has dominant eigenvalue e^{−1+√(1−t²)}
        let expected = libm::exp(-1.0 + libm::sqrt(1.0 - 0.01));
        assert!((dec.lambda - c(expected)).norm() < 1e-10);
        assert!(dec.gap > 0.0);
    }

    #[test]
    fn scan_detects_degenerate_observable() {
        let model = GeneratorModel::symmetric_two_state(1.0);
        let cfg = PropagatorConfig::default();
        let ts: Vec<Vec<f64>> = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0].iter().map(|&t| vec![t]).collect();
        let alphas = [0.0, 0.5, 1.0];
        let b = Observable::constant(&[vec![1.0, -1.0]]).unwrap();
        let good = nonarithmetic_scan(&model, &b, &ts, &alphas, SCAN_TOLERANCE, &cfg).unwrap();
        assert!(good.passed());
        assert!(good.max_radius() < 1.0 - 1e-4);
        let zero = Observable::zero(1, 2);
        let bad = nonarithmetic_scan(&model, &zero, &ts, &alphas, SCAN_TOLERANCE, &cfg).unwrap();
        assert!(!bad.passed());
        assert!(bad.sanity_ok());
    }

    #[test]
    fn residual_vanishes_at_zero_frequency() {
        let model = GeneratorModel::from_rates(3, &[(0, 1, 1.0), (1, 2, 0.5), (2, 0, 2.0)]).unwrap();
        let b = Observable::new(1, 3, &[vec![vec![1.0, 1.0], vec![-1.0], vec![0.0, -2.0]]])
            .unwrap()
            .center(model.nu())
            .unwrap();
        let f = [c(1.0), c(-0.5), c(0.25)];
        let r = product_residual(&model, &b, &[0.0], 12.0, &f, &PropagatorConfig::default()).unwrap();
        assert!(r.p < 1e-8 && r.q < 1e-8);
    }

    #[test]
    fn fit_recovers_rate() {
        let ks = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = ks.iter().map(|&k| 3.0 * libm::pow(0.8, k)).collect();
        let fit = geometric_fit(&ks, &ys).unwrap();
        assert!((fit.rate - 0.8).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_grid_shape() {
        let g = alpha_grid(DEFAULT_SCAN_ALPHAS);
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[32], 1.0);
    }
}
