//! End-to-end harnesses: operator products against Monte Carlo, the
//! eigenvalue-product limit, and the local limit comparison.

use markov_llt_core::kernel::{remainder_operator, unit_factors, PropagatorConfig};
use markov_llt_core::linalg::{dot, CMat};
use markov_llt_core::simulate::FastSlowSystem;
use markov_llt_core::spectral::{eigenvalue_product, geometric_fit, GeometricFit};
use markov_llt_core::variance::{sigma_on_interval, sigma_rho_lipschitz, HessianRoute, SigmaMatrix};
use markov_llt_core::{Complex64, GeneratorModel, Observable, Result};
use serde::{Deserialize, Serialize};

use crate::mc::{char_function, derive_seed, mean_se, simulate_endpoints, simulate_fastslow, Endpoints};

/// Compactly supported kernels with closed-form Lebesgue integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Kernel {
    /// `(1 − |x|/w)₊`, integral `w`.
    Triangle { width: f64 },
    /// `(1 − (x/w)²)³` on `|x| < w`, integral `32w/35`.
    Bump { width: f64 },
}

impl Kernel {
    pub fn name(&self) -> String {
        match self {
            Kernel::Triangle { width } => format!("triangle(w={width})"),
            Kernel::Bump { width } => format!("bump(w={width})"),
        }
    }

    fn eval1(&self, x: f64) -> f64 {
        match *self {
            Kernel::Triangle { width } => (1.0 - x.abs() / width).max(0.0),
            Kernel::Bump { width } => {
                let r = x / width;
                if r.abs() < 1.0 {
                    let q = 1.0 - r * r;
                    q * q * q
                } else {
                    0.0
                }
            }
        }
    }

    fn integral1(&self) -> f64 {
        match *self {
            Kernel::Triangle { width } => width,
            Kernel::Bump { width } => width * 32.0 / 35.0,
        }
    }

    /// Product kernel `∏_j k(x_j)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xj| self.eval1(xj)).product()
    }

    /// `⟨𝔏, g⟩` in dimension `d`.
    pub fn integral(&self, d: usize) -> f64 {
        self.integral1().powi(d as i32)
    }
}

/// A named real vector (test function or initial law).
#[derive(Clone, Debug, PartialEq)]
pub struct Named {
    pub name: String,
    pub values: Vec<f64>,
}

impl Named {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// Test functions, kernels, initial laws and displacements.
#[derive(Clone, Debug, PartialEq)]
pub struct TestBank {
    pub f: Vec<Named>,
    pub g: Vec<Kernel>,
    pub mu: Vec<Named>,
    /// Displacements in units of `√T`.
    pub u_scales: Vec<Vec<f64>>,
}

impl TestBank {
    /// `f ∈ {1, 1_{x=0}, −1_{x=0}}`, triangle and bump of width 1,
    /// `μ ∈ {δ₀, ν, uniform}`, `u ∈ {0, ±1, ±2, 5}·√T` along the first axis.
    pub fn standard(model: &GeneratorModel, d: usize) -> Self {
        let n = model.n();
        let mut ind = vec![0.0; n];
        ind[0] = 1.0;
        let axis = |c: f64| {
            let mut u = vec![0.0; d];
            u[0] = c;
            u
        };
        Self {
            f: vec![
                Named::new("one", vec![1.0; n]),
                Named::new("indicator:0", ind.clone()),
                Named::new("-indicator:0", ind.iter().map(|v| -v).collect()),
            ],
            g: vec![Kernel::Triangle { width: 1.0 }, Kernel::Bump { width: 1.0 }],
            mu: vec![
                Named::new("delta:0", ind),
                Named::new("nu", model.nu().to_vec()),
                Named::new("uniform", vec![1.0 / n as f64; n]),
            ],
            u_scales: [0.0, 1.0, -1.0, 2.0, -2.0, 5.0].iter().map(|&c| axis(c)).collect(),
        }
    }
}

/// PASS thresholds; every report echoes the values it used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub nagaev_se_multiple: f64,
    pub nagaev_abs: f64,
    pub eigprod_max: f64,
    pub eigprod_slack: f64,
    pub llt_sup: f64,
    pub llt_se_multiple: f64,
    pub rho_lipschitz_factor: f64,
    pub decay_rate: f64,
    pub decay_r_squared: f64,
    pub route_fd: f64,
    pub route_mc_se_multiple: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            nagaev_se_multiple: 4.0,
            nagaev_abs: 1e-3,
            eigprod_max: 0.01,
            eigprod_slack: 0.2,
            llt_sup: 0.05,
            llt_se_multiple: 2.0,
            rho_lipschitz_factor: 2.0,
            decay_rate: 0.95,
            decay_r_squared: 0.99,
            route_fd: 5e-4,
            route_mc_se_multiple: 4.0,
        }
    }
}

/// `∏_{k<⌊T⌋} Q(t, k/T, (k+1)/T) · Q̃(t, T)` as one matrix.
pub fn fourier_product(model: &GeneratorModel, b: &Observable, t: &[f64], horizon: f64, cfg: &PropagatorConfig) -> Result<CMat> {
    let mut acc = CMat::identity(model.n());
    for q in unit_factors(model, b, t, horizon, cfg)? {
        acc = acc.matmul(&q.matrix);
    }
    Ok(acc.matmul(&remainder_operator(model, b, t, horizon, cfg)?.matrix))
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct NagaevRow {
    pub t: Vec<f64>,
    pub horizon: f64,
    pub f: String,
    pub mu: String,
    pub mc: Complex64,
    pub se: f64,
    pub exact: Complex64,
    pub deviation: f64,
    pub bound: f64,
}

impl NagaevRow {
    pub fn passed(&self) -> bool {
        self.deviation <= self.bound
    }
}

#[derive(Clone, Debug)]
pub struct NagaevReport {
    pub rows: Vec<NagaevRow>,
    pub reps: u64,
    pub seed: u64,
}

impl NagaevReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(NagaevRow::passed)
    }
}

/// Monte Carlo characteristic function against the operator product on
/// every `(T, μ, t, f)` cell.
#[allow(clippy::too_many_arguments)]
pub fn nagaev_check(
    model: &GeneratorModel,
    b: &Observable,
    t_grid: &[Vec<f64>],
    horizons: &[f64],
    bank: &TestBank,
    reps: u64,
    seed: u64,
    cfg: &PropagatorConfig,
    th: &Thresholds,
) -> Result<NagaevReport> {
    let mut rows = Vec::new();
    for (ti, &horizon) in horizons.iter().enumerate() {
        let products = t_grid
            .iter()
            .map(|t| fourier_product(model, b, t, horizon, cfg))
            .collect::<Result<Vec<_>>>()?;
        for (mi, mu) in bank.mu.iter().enumerate() {
            let ends = simulate_endpoints(model, b, &mu.values, horizon, 0.0, reps, cell_seed(seed, ti, mi))?;
            let mu_c = to_complex(&mu.values);
            for (t, prod) in t_grid.iter().zip(&products) {
                for f in &bank.f {
                    let est = char_function(&ends, t, &f.values);
                    let exact = dot(&mu_c, &prod.mul_vec(&to_complex(&f.values)));
                    let se = est.se();
                    rows.push(NagaevRow {
                        t: t.clone(),
                        horizon,
                        f: f.name.clone(),
                        mu: mu.name.clone(),
                        mc: est.mean,
                        se,
                        exact,
                        deviation: (est.mean - exact).norm(),
                        bound: th.nagaev_se_multiple * se + th.nagaev_abs,
                    });
                }
            }
        }
    }
    Ok(NagaevReport { rows, reps, seed })
}

fn cell_seed(seed: u64, horizon_index: usize, mu_index: usize) -> u64 {
    derive_seed(seed, ((horizon_index as u64) << 16) | mu_index as u64)
}

/// Deviations below this are rounding noise from `⌊T⌋` factors and are
/// not required to decrease.
pub const ROUNDOFF_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EigprodRow {
    pub tau: Vec<f64>,
    pub horizon: f64,
    pub product: Complex64,
    pub gaussian: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug)]
pub struct EigprodReport {
    pub rows: Vec<EigprodRow>,
    pub max_deviation_at_largest: f64,
    pub monotone: bool,
}

impl EigprodReport {
    pub fn passed(&self, th: &Thresholds) -> bool {
        self.monotone && self.max_deviation_at_largest <= th.eigprod_max
    }
}

/// `∏_k λ(τ/√T, k/T, (k+1)/T)` against `exp(−τᵀΣΣ*τ/2)`.
pub fn eigprod_check(
    model: &GeneratorModel,
    b: &Observable,
    sigma: &SigmaMatrix,
    taus: &[Vec<f64>],
    horizons: &[f64],
    cfg: &PropagatorConfig,
    th: &Thresholds,
) -> Result<EigprodReport> {
    let mut rows = Vec::new();
    let mut monotone = true;
    let mut max_last: f64 = 0.0;
    for tau in taus {
        let gaussian = (-0.5 * sigma.quadratic_form(tau)).exp();
        let mut previous: Option<f64> = None;
        for &horizon in horizons {
            let t: Vec<f64> = tau.iter().map(|x| x / horizon.sqrt()).collect();
            let product = eigenvalue_product(model, b, &t, horizon, cfg)?;
            let deviation = (product - Complex64::new(gaussian, 0.0)).norm();
            if let Some(p) = previous {
                monotone &= deviation <= (1.0 + th.eigprod_slack) * p + ROUNDOFF_FLOOR;
            }
            previous = Some(deviation);
            rows.push(EigprodRow {
                tau: tau.clone(),
                horizon,
                product,
                gaussian,
                deviation,
            });
        }
        max_last = max_last.max(previous.unwrap_or(0.0));
    }
    Ok(EigprodReport {
        rows,
        max_deviation_at_largest: max_last,
        monotone,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LltRow {
    pub rho: f64,
    pub horizon: f64,
    pub u: Vec<f64>,
    pub f: String,
    pub g: String,
    pub mu: String,
    pub lhs: f64,
    pub se: f64,
    pub rhs: f64,
    pub deviation: f64,
}

/// Largest deviation at one horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HorizonSup {
    pub horizon: f64,
    pub sup: f64,
    /// Largest row standard error at this horizon.
    pub max_se: f64,
}

#[derive(Clone, Debug)]
pub struct LltReport {
    pub rows: Vec<LltRow>,
    pub sups: Vec<HorizonSup>,
    pub reps: u64,
    pub seed: u64,
}

impl LltReport {
    fn from_rows(rows: Vec<LltRow>, horizons: &[f64], reps: u64, seed: u64) -> Self {
        let sups = horizons
            .iter()
            .map(|&h| {
                let at = rows.iter().filter(|r| r.horizon == h);
                HorizonSup {
                    horizon: h,
                    sup: at.clone().map(|r| r.deviation).fold(0.0, f64::max),
                    max_se: at.map(|r| r.se).fold(0.0, f64::max),
                }
            })
            .collect();
        Self { rows, sups, reps, seed }
    }

    pub fn sup_at_largest(&self) -> f64 {
        self.sups.last().map_or(f64::NAN, |s| s.sup)
    }

    /// The last sup does not exceed the first by more than the MC allowance.
    pub fn improves(&self, th: &Thresholds) -> bool {
        match (self.sups.first(), self.sups.last()) {
            (Some(a), Some(z)) => z.sup <= a.sup + th.llt_se_multiple * a.max_se.max(z.max_se),
            _ => false,
        }
    }

    pub fn passed(&self, th: &Thresholds) -> bool {
        self.sup_at_largest() <= th.llt_sup && self.improves(th)
    }
}

/// Bank rows for one set of endpoints.
#[allow(clippy::too_many_arguments)]
fn llt_rows(
    ends: &Endpoints,
    nu: &[f64],
    sigma: &SigmaMatrix,
    horizon: f64,
    rho: f64,
    bank: &TestBank,
    mu_name: &str,
    rows: &mut Vec<LltRow>,
) -> Result<()> {
    let d = ends.d;
    let scale = sigma.det_factor() * (2.0 * std::f64::consts::PI * horizon).powf(d as f64 / 2.0);
    let root = horizon.sqrt();
    let mut shifted = vec![0.0; d];
    for scales in &bank.u_scales {
        let u: Vec<f64> = scales.iter().map(|c| c * root).collect();
        let gauss = (-sigma.quadratic_form_inverse(&u)? / (2.0 * horizon)).exp();
        for g in &bank.g {
            // g(S − u) does not depend on f, so evaluate it once per replica.
            let gv: Vec<f64> = (0..ends.len())
                .map(|i| {
                    for (j, s) in shifted.iter_mut().enumerate() {
                        *s = ends.value(i)[j] - u[j];
                    }
                    g.eval(&shifted)
                })
                .collect();
            for f in &bank.f {
                let est = mean_se((0..ends.len()).map(|i| f.values[ends.x[i] as usize] * gv[i]));
                let nu_f: f64 = nu.iter().zip(&f.values).map(|(a, b)| a * b).sum();
                let lhs = scale * est.mean;
                let rhs = gauss * nu_f * g.integral(d);
                rows.push(LltRow {
                    rho,
                    horizon,
                    u: u.clone(),
                    f: f.name.clone(),
                    g: g.name(),
                    mu: mu_name.to_string(),
                    lhs,
                    se: scale * est.se,
                    rhs,
                    deviation: (lhs - rhs).abs(),
                });
            }
        }
    }
    Ok(())
}

/// Local limit comparison for `S(ρ, T)`; `ρ = 0` is the plain `S_T`.
#[allow(clippy::too_many_arguments)]
pub fn llt_rho_rows(
    model: &GeneratorModel,
    b: &Observable,
    sigma: &SigmaMatrix,
    rho: f64,
    bank: &TestBank,
    horizons: &[f64],
    reps: u64,
    seed: u64,
) -> Result<LltReport> {
    let mut rows = Vec::new();
    for (ti, &horizon) in horizons.iter().enumerate() {
        for (mi, mu) in bank.mu.iter().enumerate() {
            let ends = simulate_endpoints(model, b, &mu.values, horizon, rho, reps, cell_seed(seed, ti, mi))?;
            llt_rows(&ends, model.nu(), sigma, horizon, rho, bank, &mu.name, &mut rows)?;
        }
    }
    Ok(LltReport::from_rows(rows, horizons, reps, seed))
}

#[allow(clippy::too_many_arguments)]
pub fn llt_check(
    model: &GeneratorModel,
    b: &Observable,
    sigma: &SigmaMatrix,
    bank: &TestBank,
    horizons: &[f64],
    reps: u64,
    seed: u64,
) -> Result<LltReport> {
    llt_rho_rows(model, b, sigma, 0.0, bank, horizons, reps, seed)
}

#[derive(Clone, Debug)]
pub struct RhoCell {
    pub rho: f64,
    pub sigma: SigmaMatrix,
    pub report: LltReport,
}

#[derive(Clone, Debug)]
pub struct LltRhoReport {
    pub cells: Vec<RhoCell>,
    /// `sup_α ‖∇²_t λ(0, α, α)‖`, a Lipschitz constant of `ρ ↦ ΣΣ*_ρ`.
    pub lipschitz: f64,
    /// `(ρ_i, ρ_{i+1}, max |ΣΣ*_{ρ_{i+1}} − ΣΣ*_{ρ_i}|)`.
    pub jumps: Vec<(f64, f64, f64)>,
}

impl LltRhoReport {
    pub fn continuous(&self, th: &Thresholds) -> bool {
        self.jumps
            .iter()
            .all(|&(a, z, jump)| jump <= th.rho_lipschitz_factor * self.lipschitz * (z - a).abs())
    }

    pub fn passed(&self, th: &Thresholds) -> bool {
        self.continuous(th) && self.cells.iter().all(|c| c.report.passed(th))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn llt_rho_check(
    model: &GeneratorModel,
    b: &Observable,
    rhos: &[f64],
    quadrature_points: usize,
    bank: &TestBank,
    horizons: &[f64],
    reps: u64,
    seed: u64,
) -> Result<LltRhoReport> {
    let cfg = PropagatorConfig::default();
    let mut cells = Vec::new();
    for &rho in rhos {
        let sigma = sigma_on_interval(model, b, rho, 1.0, quadrature_points, HessianRoute::GreenKubo, &cfg)?;
        let report = llt_rho_rows(model, b, &sigma, rho, bank, horizons, reps, seed)?;
        cells.push(RhoCell { rho, sigma, report });
    }
    let jumps = cells
        .windows(2)
        .map(|w| (w[0].rho, w[1].rho, w[0].sigma.cov.max_abs_diff(&w[1].sigma.cov)))
        .collect();
    Ok(LltRhoReport {
        cells,
        lipschitz: sigma_rho_lipschitz(model, b, 101)?,
        jumps,
    })
}

#[derive(Clone, Debug)]
pub struct FastslowCell {
    pub eps: f64,
    pub horizon: f64,
    pub sigma: SigmaMatrix,
    pub max_duhamel_residual: f64,
    pub report: LltReport,
}

#[derive(Clone, Debug)]
pub enum FastslowReport {
    /// The forcing does not depend on the fast state, so the rescaled error
    /// vanishes and there is no density to compare.
    NotApplicable,
    Cells(Vec<FastslowCell>),
}

impl FastslowReport {
    pub fn passed(&self, th: &Thresholds) -> bool {
        match self {
            FastslowReport::NotApplicable => false,
            FastslowReport::Cells(cells) => cells.iter().all(|c| c.report.sup_at_largest() <= th.llt_sup),
        }
    }
}

/// Density of `(Y − y)/ε` against the Gaussian with covariance from the
/// fundamental-matrix weighted observable, one cell per `ε`.
#[allow(clippy::too_many_arguments)]
pub fn fastslow_llt_check(
    system: &FastSlowSystem,
    eps_list: &[f64],
    y0: &[f64],
    quadrature_points: usize,
    bank: &TestBank,
    reps: u64,
    seed: u64,
) -> Result<FastslowReport> {
    if system.fluctuation().is_zero() {
        return Ok(FastslowReport::NotApplicable);
    }
    let cfg = PropagatorConfig::default();
    let duhamel = system.duhamel_observable();
    let sigma = sigma_on_interval(&system.model, &duhamel, 0.0, 1.0, quadrature_points, HessianRoute::GreenKubo, &cfg)?;
    let nu_only = TestBank {
        mu: vec![Named::new("nu", system.model.nu().to_vec())],
        ..bank.clone()
    };
    let mut cells = Vec::new();
    for (ei, &eps) in eps_list.iter().enumerate() {
        let horizon = system.t_final / eps;
        let (ends, worst) = simulate_fastslow(system, eps, y0, reps, cell_seed(seed, ei, 0))?;
        let mut rows = Vec::new();
        llt_rows(&ends, system.model.nu(), &sigma, horizon, 0.0, &nu_only, "nu", &mut rows)?;
        cells.push(FastslowCell {
            eps,
            horizon,
            sigma: sigma.clone(),
            max_duhamel_residual: worst,
            report: LltReport::from_rows(rows, &[horizon], reps, seed),
        });
    }
    Ok(FastslowReport::Cells(cells))
}

#[derive(Clone, Debug)]
pub struct DecayRow {
    pub t: Vec<f64>,
    pub horizons: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fit: GeometricFit,
}

/// `|⟨μ, ∏Q f⟩|` over integer horizons and its fitted geometric rate in `⌊T⌋`.
pub fn decay_check(
    model: &GeneratorModel,
    b: &Observable,
    t_list: &[Vec<f64>],
    horizons: &[f64],
    mu: &[f64],
    f: &[f64],
    cfg: &PropagatorConfig,
) -> Result<Vec<DecayRow>> {
    let mu_c = to_complex(mu);
    let f_c = to_complex(f);
    t_list
        .iter()
        .map(|t| {
            let magnitudes = horizons
                .iter()
                .map(|&h| Ok(dot(&mu_c, &fourier_product(model, b, t, h, cfg)?.mul_vec(&f_c)).norm()))
                .collect::<Result<Vec<_>>>()?;
            let ks: Vec<f64> = horizons.iter().map(|h| h.floor()).collect();
            let fit = geometric_fit(&ks, &magnitudes)?;
            Ok(DecayRow {
                t: t.clone(),
                horizons: horizons.to_vec(),
                magnitudes,
                fit,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_integrals_match_quadrature() {
        for k in [Kernel::Triangle { width: 1.0 }, Kernel::Bump { width: 1.5 }] {
            let n = 200_000;
            let (a, b) = (-2.0, 2.0);
            let h = (b - a) / n as f64;
            let riemann: f64 = (0..n).map(|i| k.eval(&[a + (i as f64 + 0.5) * h])).sum::<f64>() * h;
            assert!((riemann - k.integral(1)).abs() < 1e-8, "{k:?}");
        }
        let k = Kernel::Triangle { width: 1.0 };
        assert_eq!(k.eval(&[0.5, 0.5]), 0.25);
        assert_eq!(k.integral(2), 1.0);
    }
}
