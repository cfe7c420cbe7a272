//! Fourier-twisted transition operators.
//!
//! `Q(t, α, β)` acts on functions of the state by
//! `(Qf)(x) = E_x[exp(i t·∫₀¹ b(α + s(β−α), X_s) ds) f(X₁)]`. On a finite
//! state space it is the terminal value `M(1)` of the Feynman–Kac propagator
//! `M′(r) = M(r)·(G + i·diag(t·b(α + r(β−α), ·)))`, `M(0) = I`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{dot, expm, CMat};
use crate::model::GeneratorModel;
use crate::observable::ObservableFn;

/// Largest acceptable step-doubling disagreement.
pub const REFINE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagatorMethod {
    /// Fourth-order commutator-free Magnus scheme (two exponentials per step).
    Magnus4,
    /// Classical fourth-order Runge–Kutta.
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagatorConfig {
    pub method: PropagatorMethod,
    /// Substeps per unit of time; at least 8.
    pub steps: usize,
    /// Re-solve at twice the resolution and report the disagreement.
    pub refine_check: bool,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            method: PropagatorMethod::Magnus4,
            steps: 256,
            refine_check: false,
        }
    }
}

impl PropagatorConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 8 {
            return Err(Error::InvalidArgument(format!("propagator needs at least 8 steps per unit time, got {}", self.steps)));
        }
        Ok(())
    }
}

/// A realised `Q(t, α, β)` (or the end-piece `Q̃(t, T)`).
#[derive(Clone, Debug)]
pub struct FourierOperator {
    pub matrix: CMat,
    pub t: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub step_count: usize,
    /// `max |M_steps − M_2·steps|` when the refinement check ran.
    pub refine_estimate: Option<f64>,
}

/// Diagonal weights `i·t·b(α, x)` for all states.
fn weights<O: ObservableFn + ?Sized>(b: &O, t: &[f64], alpha: f64, scratch: &mut [f64], out: &mut [f64]) {
    let d = b.dim();
    b.eval_all(alpha, scratch);
    for (x, w) in out.iter_mut().enumerate() {
        *w = (0..d).map(|j| t[j] * scratch[x * d + j]).sum();
    }
}

fn generator_with_weight(model: &GeneratorModel, w: &[f64]) -> CMat {
    let g = model.generator();
    let n = model.n();
    CMat::from_fn(n, n, |r, c| {
        let re = g[(r, c)];
        if r == c {
            Complex64::new(re, w[r])
        } else {
            Complex64::new(re, 0.0)
        }
    })
}

/// Propagates `M′ = M·A(r)` over `r ∈ [0, length]` in `steps` equal steps,
/// where `A(r) = G + i·diag(t·b(alpha_at(r), ·))`.
fn propagate<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    alpha_at: &dyn Fn(f64) -> f64,
    length: f64,
    steps: usize,
    method: PropagatorMethod,
) -> Result<CMat> {
    let n = model.n();
    let h = length / steps as f64;
    let mut scratch = vec![0.0; n * b.dim()];
    let mut w = vec![0.0; n];
    let mut a_at = |r: f64| {
        weights(b, t, alpha_at(r), &mut scratch, &mut w);
        generator_with_weight(model, &w)
    };
    let mut m = CMat::identity(n);
    match method {
        PropagatorMethod::Magnus4 => {
            let s3 = libm::sqrt(3.0);
            let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
            let (a1, a2) = (0.25 - s3 / 6.0, 0.25 + s3 / 6.0);
            for k in 0..steps {
                let r0 = k as f64 * h;
                let m1 = a_at(r0 + c1 * h);
                let m2 = a_at(r0 + c2 * h);
                let first = m1.scaled(Complex64::from(h * a2)).add_mat(&m2.scaled(Complex64::from(h * a1)));
                let second = m1.scaled(Complex64::from(h * a1)).add_mat(&m2.scaled(Complex64::from(h * a2)));
                m = m.matmul(&expm(&first)?).matmul(&expm(&second)?);
            }
        }
        PropagatorMethod::Rk4 => {
            let half = Complex64::from(0.5 * h);
            let full = Complex64::from(h);
            for k in 0..steps {
                let r0 = k as f64 * h;
                let a0 = a_at(r0);
                let am = a_at(r0 + 0.5 * h);
                let a1 = a_at(r0 + h);
                let k1 = m.matmul(&a0);
                let k2 = m.add_mat(&k1.scaled(half)).matmul(&am);
                let k3 = m.add_mat(&k2.scaled(half)).matmul(&am);
                let k4 = m.add_mat(&k3.scaled(full)).matmul(&a1);
                let incr = k1
                    .add_mat(&k2.scaled(Complex64::from(2.0)))
                    .add_mat(&k3.scaled(Complex64::from(2.0)))
                    .add_mat(&k4)
                    .scaled(Complex64::from(h / 6.0));
                m = m.add_mat(&incr);
            }
        }
    }
    Ok(m)
}

fn check_inputs<O: ObservableFn + ?Sized>(model: &GeneratorModel, b: &O, t: &[f64]) -> Result<()> {
    if b.num_states() != model.n() {
        return Err(Error::DimensionMismatch {
            what: "observable states vs model states",
            expected: model.n(),
            actual: b.num_states(),
        });
    }
    if t.len() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "frequency dimension",
            expected: b.dim(),
            actual: t.len(),
        });
    }
    Ok(())
}

fn solve_with_refinement<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    alpha_at: &dyn Fn(f64) -> f64,
    length: f64,
    steps: usize,
    cfg: &PropagatorConfig,
) -> Result<(CMat, Option<f64>)> {
    let m = propagate(model, b, t, alpha_at, length, steps, cfg.method)?;
    if !cfg.refine_check {
        return Ok((m, None));
    }
    let fine = propagate(model, b, t, alpha_at, length, 2 * steps, cfg.method)?;
    let estimate = m.max_abs_diff(&fine);
    if estimate > REFINE_TOLERANCE {
        return Err(Error::OdeToleranceFailure {
            estimate,
            tolerance: REFINE_TOLERANCE,
        });
    }
    Ok((m, Some(estimate)))
}

/// `Q(t, α, β)` as a dense complex matrix.
pub fn fourier_operator<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    alpha: f64,
    beta: f64,
    cfg: &PropagatorConfig,
) -> Result<FourierOperator> {
    cfg.validate()?;
    check_inputs(model, b, t)?;
    for a in [alpha, beta] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::AlphaOutOfRange { alpha: a });
        }
    }
    let alpha_at = move |r: f64| alpha + r * (beta - alpha);
    let (matrix, refine_estimate) = solve_with_refinement(model, b, t, &alpha_at, 1.0, cfg.steps, cfg)?;
    Ok(FourierOperator {
        matrix,
        t: t.to_vec(),
        alpha,
        beta,
        step_count: cfg.steps,
        refine_estimate,
    })
}

/// End-piece `Q̃(t, T)`: the propagator over `[0, T − ⌊T⌋]` with weight
/// `t·b((⌊T⌋ + s)/T, ·)`. Identity for integer `T`.
pub fn remainder_operator<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    horizon: f64,
    cfg: &PropagatorConfig,
) -> Result<FourierOperator> {
    cfg.validate()?;
    check_inputs(model, b, t)?;
    check_horizon(horizon)?;
    let whole = libm::floor(horizon);
    let frac = horizon - whole;
    let alpha0 = whole / horizon;
    if frac == 0.0 {
        return Ok(FourierOperator {
            matrix: CMat::identity(model.n()),
            t: t.to_vec(),
            alpha: 1.0,
            beta: 1.0,
            step_count: 0,
            refine_estimate: None,
        });
    }
    let steps = (libm::ceil(frac * cfg.steps as f64) as usize).max(1);
    let alpha_at = move |s: f64| ((whole + s) / horizon).min(1.0);
    let (matrix, refine_estimate) = solve_with_refinement(model, b, t, &alpha_at, frac, steps, cfg)?;
    Ok(FourierOperator {
        matrix,
        t: t.to_vec(),
        alpha: alpha0,
        beta: 1.0,
        step_count: steps,
        refine_estimate,
    })
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon >= 1.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon T must be finite and ≥ 1, got {horizon}")));
    }
    Ok(())
}

/// The unit-interval factors `Q(t, k/T, (k+1)/T)` for `k = 0, …, ⌊T⌋−1`.
pub fn unit_factors<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    horizon: f64,
    cfg: &PropagatorConfig,
) -> Result<Vec<FourierOperator>> {
    check_horizon(horizon)?;
    let whole = libm::floor(horizon) as usize;
    (0..whole)
        .map(|k| {
            let a = k as f64 / horizon;
            let bta = ((k + 1) as f64 / horizon).min(1.0);
            fourier_operator(model, b, t, a, bta, cfg)
        })
        .collect()
}

/// `A₁A₂⋯A_m` (so `A_m` acts first); the empty product is the identity.
pub fn operator_product<'a, I>(n: usize, factors: I) -> Result<CMat>
where
    I: IntoIterator<Item = &'a CMat>,
{
    let mut acc = CMat::identity(n);
    for f in factors {
        if f.nrows() != n || f.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "operator product factor",
                expected: n,
                actual: f.nrows(),
            });
        }
        acc = acc.matmul(f);
    }
    Ok(acc)
}

/// `⟨μ, ∏_{k<⌊T⌋} Q(t, k/T, (k+1)/T) · Q̃(t, T) f⟩ = E_μ[e^{i t·S_T} f(X_T)]`.
///
/// Evaluated right to left as repeated matrix–vector products.
pub fn nagaev_value<O: ObservableFn + ?Sized>(
    model: &GeneratorModel,
    b: &O,
    t: &[f64],
    horizon: f64,
    f: &[Complex64],
    mu: &[f64],
    cfg: &PropagatorConfig,
) -> Result<Complex64> {
    let n = model.n();
    for (what, len) in [("test function", f.len()), ("initial law", mu.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    let tail = remainder_operator(model, b, t, horizon, cfg)?;
    let mut w = tail.matrix.mul_vec(f);
    let whole = libm::floor(horizon) as usize;
    for k in (0..whole).rev() {
        let a = k as f64 / horizon;
        let bta = ((k + 1) as f64 / horizon).min(1.0);
        let q = fourier_operator(model, b, t, a, bta, cfg)?;
        w = q.matrix.mul_vec(&w);
    }
    let mu_c: Vec<Complex64> = mu.iter().map(|&p| Complex64::from(p)).collect();
    Ok(dot(&mu_c, &w))
}
