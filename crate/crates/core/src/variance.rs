//! The diffusion matrix `ΣΣ* = −∫ ∇²_t λ(0, α, α) dα` and the per-α
//! Hessians behind it.
//!
//! Three deterministic routes to `∇²_t λ(0, α, α)` are provided: the
//! continuous-time Green–Kubo formula (reference), the discrete corrector
//! formula `−E_ν[(J + u(X₁) − u(X₀))(J + u(X₁) − u(X₀))*]` evaluated with
//! block matrix exponentials, and finite differences of the dominant
//! eigenvalue. The Monte Carlo route lives with the parallel drivers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{fourier_operator, PropagatorConfig};
use crate::linalg::{cholesky, expm, symmetric_eigenvalues, RMat};
use crate::model::GeneratorModel;
use crate::observable::ObservableFn;
use crate::quadrature::gauss_legendre;
use crate::spectral::dominant_decomposition;

pub const DEFAULT_QUADRATURE_POINTS: usize = 17;
pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Smallest eigenvalue accepted for a positive-definite `ΣΣ*`.
pub const PD_THRESHOLD: f64 = 1e-10;

/// Which formula produced a Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianRoute {
    GreenKubo,
    Corrector,
    FiniteDifference,
}

impl HessianRoute {
    pub fn name(self) -> &'static str {
        match self {
            HessianRoute::GreenKubo => "green-kubo",
            HessianRoute::Corrector => "corrector",
            HessianRoute::FiniteDifference => "finite-difference",
        }
    }
}

/// Solution of the Poisson problem `(I − P(1))u = g` at one α.
#[derive(Clone, Debug)]
pub struct Corrector {
    pub alpha: f64,
    /// `u[(j, x)]`.
    pub u: RMat,
    /// `g[(j, x)] = E_x ∫₀¹ b(α, X_s)_j ds`.
    pub g: RMat,
}

#[derive(Clone, Debug)]
pub struct SigmaMatrix {
    /// `ΣΣ*`.
    pub cov: RMat,
    /// Lower-triangular `Σ` with `ΣΣᵀ = cov`.
    pub factor: RMat,
    /// `(α, ∇²_t λ(0, α, α))` at the quadrature nodes.
    pub per_alpha: Vec<(f64, RMat)>,
    pub route: HessianRoute,
    /// Integration range in α.
    pub lower: f64,
    pub upper: f64,
}

impl SigmaMatrix {
    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// `det Σ`, the product of the factor's diagonal.
    pub fn det_factor(&self) -> f64 {
        (0..self.dim()).map(|i| self.factor[(i, i)]).product()
    }

    /// `uᵀ (ΣΣ*)⁻¹ u`.
    pub fn quadratic_form_inverse(&self, u: &[f64]) -> Result<f64> {
        let y = self.cov.lu()?.solve(u);
        Ok(u.iter().zip(&y).map(|(a, b)| a * b).sum())
    }

    /// `τᵀ ΣΣ* τ`.
    pub fn quadratic_form(&self, tau: &[f64]) -> f64 {
        let y = self.cov.mul_vec(tau);
        tau.iter().zip(&y).map(|(a, b)| a * b).sum()
    }
}

/// `b(α, ·)` as a `d × n` matrix.
fn frozen_table<O: ObservableFn + ?Sized>(b: &O, alpha: f64) -> RMat {
    let (d, n) = (b.dim(), b.num_states());
    let flat = b.eval_vec(alpha);
    RMat::from_fn(d, n, |j, x| flat[x * d + j])
}

fn check_states<O: ObservableFn + ?Sized>(model: &GeneratorModel, b: &O) -> Result<()> {
    if b.num_states() != model.n() {
        return Err(Error::DimensionMismatch {
            what: "observable states vs model states",
            expected: model.n(),
            actual: b.num_states(),
        });
    }
    Ok(())
}

fn check_centered(model: &GeneratorModel, table: &RMat) -> Result<()> {
    let nu = model.nu();
    for j in 0..table.nrows() {
        let row = table.row(j);
        let mean: f64 = row.iter().zip(nu).map(|(a, p)| a * p).sum();
        let scale = row.iter().fold(1.0, |m: f64, a| m.max(a.abs()));
        if mean.abs() > 1e-9 * scale {
            return Err(Error::InvalidArgument(format!("observable coordinate {j} has ν-mean {mean:e}; center it first")));
        }
    }
    Ok(())
}

/// `W = G − 1⊗ν`, invertible for an irreducible chain.
fn fundamental(model: &GeneratorModel) -> RMat {
    let g = model.generator();
    let nu = model.nu();
    RMat::from_fn(model.n(), model.n(), |r, c| g[(r, c)] - nu[c])
}

fn inner_nu(nu: &[f64], a: &[f64], b: &[f64]) -> f64 {
    nu.iter().zip(a).zip(b).map(|((p, x), y)| p * x * y).sum()
}

/// λ(t, α, β) from the dominant eigenpair of `Q(t, α, β)`.
pub fn lambda_at<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    alpha: f64,
    beta: f64,
    cfg: &PropagatorConfig,
) -> Result<Complex64> {
    let q = fourier_operator(model, b, t, alpha, beta, cfg)?;
    Ok(dominant_decomposition(&q.matrix)?.lambda)
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-4..=1e-2).contains(&h) {
        return Err(Error::InvalidArgument(format!("finite-difference step must lie in [1e-4, 1e-2], got {h}")));
    }
    Ok(())
}

/// Central-difference `|∂_{t_j} λ(0, α, β)|` for each coordinate.
pub fn lambda_gradient_check<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    alpha: f64,
    beta: f64,
    h: f64,
    cfg: &PropagatorConfig,
) -> Result<Vec<f64>> {
    check_step(h)?;
    check_states(model, b)?;
    let d = b.dim();
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let mut t = vec![0.0; d];
        t[j] = h;
        let plus = lambda_at(model, b, &t, alpha, beta, cfg)?;
        t[j] = -h;
        let minus = lambda_at(model, b, &t, alpha, beta, cfg)?;
        out.push(((plus - minus) / (2.0 * h)).norm());
    }
    Ok(out)
}

/// `g_α = ∫₀¹ e^{sG} ds · b(α, ·)` and the corrector `u` with `ν(u) = 0`.
pub fn corrector_solve<O: ObservableFn + ?Sized>(model: &GeneratorModel, b: &O, alpha: f64) -> Result<Corrector> {
    check_states(model, b)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange { alpha });
    }
    let table = frozen_table(b, alpha);
    check_centered(model, &table)?;
    let n = model.n();
    let w_lu = fundamental(model).lu()?;
    let p = model.transition_matrix(1.0)?.p;
    let p_minus_i = p.sub_mat(&RMat::identity(n));
    let nu = model.nu();
    // I − P + 1⊗ν is invertible and preserves the mean-zero subspace.
    let poisson = RMat::from_fn(n, n, |r, c| -p_minus_i[(r, c)] + nu[c]).lu()?;
    let d = table.nrows();
    let mut g = RMat::zeros(d, n);
    let mut u = RMat::zeros(d, n);
    for j in 0..d {
        let gj = w_lu.solve(&p_minus_i.mul_vec(table.row(j)));
        let uj = poisson.solve(&gj);
        for x in 0..n {
            g[(j, x)] = gj[x];
            u[(j, x)] = uj[x];
        }
    }
    Ok(Corrector { alpha, u, g })
}

/// Continuous-time Green–Kubo Hessian: with `Wφ_j = −b_j`,
/// `H_jk = −E_ν[b_j φ_k + φ_j b_k]`.
pub fn hessian_green_kubo<O: ObservableFn + ?Sized>(model: &GeneratorModel, b: &O, alpha: f64) -> Result<RMat> {
    check_states(model, b)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange { alpha });
    }
    let table = frozen_table(b, alpha);
    check_centered(model, &table)?;
    let w_lu = fundamental(model).lu()?;
    let d = table.nrows();
    let phis: Vec<Vec<f64>> = (0..d)
        .map(|j| w_lu.solve(table.row(j)).into_iter().map(|x| -x).collect())
        .collect();
    let nu = model.nu();
    Ok(RMat::from_fn(d, d, |j, k| {
        -(inner_nu(nu, table.row(j), &phis[k]) + inner_nu(nu, &phis[j], table.row(k)))
    }))
}

/// Top-right `n × n` block of `exp` of a block upper-bidiagonal matrix with
/// `G` on the diagonal and the given couplings above it.
fn van_loan(g: &RMat, couplings: &[&RMat]) -> Result<RMat> {
    let n = g.nrows();
    let blocks = couplings.len() + 1;
    let mut big = RMat::zeros(n * blocks, n * blocks);
    for k in 0..blocks {
        for r in 0..n {
            for c in 0..n {
                big[(k * n + r, k * n + c)] = g[(r, c)];
                if k + 1 < blocks {
                    big[(k * n + r, (k + 1) * n + c)] = couplings[k][(r, c)];
                }
            }
        }
    }
    let e = expm(&big)?;
    let off = (blocks - 1) * n;
    Ok(RMat::from_fn(n, n, |r, c| e[(r, off + c)]))
}

/// Discrete corrector Hessian
/// `H_jk = −E_ν[(J_j + u_j(X₁) − u_j(X₀))(J_k + u_k(X₁) − u_k(X₀))]`
/// with `J = ∫₀¹ b(α, X_s) ds`; all moments come from block exponentials.
pub fn hessian_corrector<O: ObservableFn + ?Sized>(model: &GeneratorModel, b: &O, alpha: f64) -> Result<RMat> {
    let corr = corrector_solve(model, b, alpha)?;
    let table = frozen_table(b, alpha);
    let g = model.generator();
    let nu = model.nu();
    let n = model.n();
    let d = table.nrows();
    let p = model.transition_matrix(1.0)?.p;
    let diags: Vec<RMat> = (0..d).map(|j| RMat::diag(table.row(j))).collect();
    // K_j = ∫₀¹ e^{sG} B_j e^{(1−s)G} ds, so E_x[J_j h(X₁)] = (K_j h)(x).
    let ks = diags.iter().map(|bj| van_loan(g, &[bj])).collect::<Result<Vec<_>>>()?;
    let ones = vec![1.0; n];
    let mut h = RMat::zeros(d, d);
    for j in 0..d {
        for k in j..d {
            // E_x[J_j J_k] = ((L_jk + L_kj) 1)(x) with L the ordered double integral.
            let l_jk = van_loan(g, &[&diags[j], &diags[k]])?;
            let l_kj = van_loan(g, &[&diags[k], &diags[j]])?;
            let jj: f64 = dot_nu(nu, &l_jk.add_mat(&l_kj).mul_vec(&ones));
            let (uj, uk) = (corr.u.row(j), corr.u.row(k));
            let (gj, gk) = (corr.g.row(j), corr.g.row(k));
            let j_u1 = dot_nu(nu, &ks[j].mul_vec(uk)) + dot_nu(nu, &ks[k].mul_vec(uj));
            let j_u0 = inner_nu(nu, gj, uk) + inner_nu(nu, gk, uj);
            let pu_k = p.mul_vec(uk);
            let pu_j = p.mul_vec(uj);
            let uu = 2.0 * inner_nu(nu, uj, uk) - inner_nu(nu, uj, &pu_k) - inner_nu(nu, uk, &pu_j);
            let value = -(jj + j_u1 - j_u0 + uu);
            h[(j, k)] = value;
            h[(k, j)] = value;
        }
    }
    Ok(h)
}

fn dot_nu(nu: &[f64], v: &[f64]) -> f64 {
    nu.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Central second differences of `Re λ(t, α, α)` at `t = 0`.
pub fn hessian_fd<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    alpha: f64,
    h: f64,
    cfg: &PropagatorConfig,
) -> Result<RMat> {
    check_step(h)?;
    check_states(model, b)?;
    let d = b.dim();
    let re = |t: &[f64]| -> Result<f64> { Ok(lambda_at(model, b, t, alpha, alpha, cfg)?.re) };
    let center = re(&vec![0.0; d])?;
    let mut out = RMat::zeros(d, d);
    for j in 0..d {
        let mut t = vec![0.0; d];
        t[j] = h;
        let plus = re(&t)?;
        t[j] = -h;
        let minus = re(&t)?;
        out[(j, j)] = (plus - 2.0 * center + minus) / (h * h);
        for k in 0..j {
            let mut sum = 0.0;
            for (sj, sk, sign) in [(h, h, 1.0), (h, -h, -1.0), (-h, h, -1.0), (-h, -h, 1.0)] {
                let mut t = vec![0.0; d];
                t[j] = sj;
                t[k] = sk;
                sum += sign * re(&t)?;
            }
            let v = sum / (4.0 * h * h);
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    Ok(out)
}

/// Finite-difference Hessian at `h` and `h/2` with their disagreement.
#[derive(Clone, Debug)]
pub struct FdHessian {
    pub h: f64,
    pub hessian: RMat,
    pub half_step: RMat,
    /// `max |H(h) − H(h/2)|`; an `O(h²)` bias estimate.
    pub richardson_gap: f64,
}

pub fn hessian_fd_checked<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    alpha: f64,
    h: f64,
    cfg: &PropagatorConfig,
) -> Result<FdHessian> {
    let hessian = hessian_fd(model, b, alpha, h, cfg)?;
    let half = 0.5 * h;
    let half_step = if half >= 1e-4 {
        hessian_fd(model, b, alpha, half, cfg)?
    } else {
        hessian.clone()
    };
    Ok(FdHessian {
        h,
        richardson_gap: hessian.max_abs_diff(&half_step),
        hessian,
        half_step,
    })
}

/// Per-α Hessian by the chosen route.
pub fn hessian<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    alpha: f64,
    route: HessianRoute,
    cfg: &PropagatorConfig,
) -> Result<RMat> {
    match route {
        HessianRoute::GreenKubo => hessian_green_kubo(model, b, alpha),
        HessianRoute::Corrector => hessian_corrector(model, b, alpha),
        HessianRoute::FiniteDifference => hessian_fd(model, b, alpha, DEFAULT_FD_STEP, cfg),
    }
}

fn symmetrize(m: &RMat) -> RMat {
    RMat::from_fn(m.nrows(), m.ncols(), |r, c| 0.5 * (m[(r, c)] + m[(c, r)]))
}

/// `−∫_lower^upper ∇²_t λ(0, α, α) dα` by Gauss–Legendre, factored.
pub fn sigma_on_interval<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    lower: f64,
    upper: f64,
    points: usize,
    route: HessianRoute,
    cfg: &PropagatorConfig,
) -> Result<SigmaMatrix> {
    if !(0.0 <= lower && lower < upper && upper <= 1.0) {
        return Err(Error::InvalidArgument(format!("integration range [{lower}, {upper}] must satisfy 0 ≤ lower < upper ≤ 1")));
    }
    if points == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one point".into()));
    }
    let d = b.dim();
    let (nodes, weights) = gauss_legendre(points, lower, upper);
    let mut cov = RMat::zeros(d, d);
    let mut per_alpha = Vec::with_capacity(points);
    for (&alpha, &w) in nodes.iter().zip(&weights) {
        let h = hessian(model, b, alpha, route, cfg)?;
        cov = cov.sub_mat(&h.scaled(w));
        per_alpha.push((alpha, h));
    }
    let cov = symmetrize(&cov);
    let min_eigenvalue = symmetric_eigenvalues(&cov)?.first().copied().unwrap_or(0.0);
    if !(min_eigenvalue >= PD_THRESHOLD) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    let factor = cholesky(&cov)?;
    Ok(SigmaMatrix {
        cov,
        factor,
        per_alpha,
        route,
        lower,
        upper,
    })
}

/// `ΣΣ* = −∫₀¹ ∇²_t λ(0, α, α) dα` from the Green–Kubo route.
pub fn sigma_total<O: ObservableFn + ?Sized>(model: &GeneratorModel, b: &O, points: usize) -> Result<SigmaMatrix> {
    sigma_on_interval(model, b, 0.0, 1.0, points, HessianRoute::GreenKubo, &PropagatorConfig::default())
}

/// `ΣΣ*_ρ = −∫_ρ¹ ∇²_t λ(0, α, α) dα`, the diffusion matrix of `S(ρ, T)`.
pub fn sigma_rho<O: ObservableFn + ?Sized>(model: &GeneratorModel, b: &O, rho: f64, points: usize) -> Result<SigmaMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("ρ must lie in [0, 1), got {rho}")));
    }
    sigma_on_interval(model, b, rho, 1.0, points, HessianRoute::GreenKubo, &PropagatorConfig::default())
}

/// `sup_α ‖∇²_t λ(0, α, α)‖_∞` on an equispaced grid: a Lipschitz constant
/// of `ρ ↦ ΣΣ*_ρ`.
pub fn sigma_rho_lipschitz<O: ObservableFn + ?Sized>(model: &GeneratorModel, b: &O, grid_points: usize) -> Result<f64> {
    let mut best: f64 = 0.0;
    for alpha in crate::spectral::alpha_grid(grid_points.max(2)) {
        best = best.max(hessian_green_kubo(model, b, alpha)?.norm_inf());
    }
    Ok(best)
}
