//! Linear fast–slow systems
//! `dY = [A(s)Y + v(s/t, X_{s/ε})] ds`, their averaged flow
//! `dy = [A(s)y + v̄(s/t)] ds`, and the fundamental matrix `dU = A U ds`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{determinant, RMat};
use crate::model::GeneratorModel;
use crate::observable::{horner, Observable, ObservableFn};
use crate::rng::replica_stream;

use super::{sample_initial, PathSample, PathSampler};

/// Largest accepted Duhamel residual on a single path.
pub const DUHAMEL_TOLERANCE: f64 = 1e-6;
/// RK4 steps per unit of α used to build `U(t)U(αt)⁻¹`.
const PROPAGATOR_STEPS: f64 = 4096.0;

/// Square matrix whose entries are polynomials in macroscopic time.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    d: usize,
    entries: Vec<Vec<f64>>,
}

impl PolyMatrix {
    /// `table[r][c]` holds the ascending coefficients of `A(s)[r, c]`.
    pub fn new(table: &[Vec<Vec<f64>>]) -> Result<Self> {
        let d = table.len();
        if d == 0 {
            return Err(Error::InvalidArgument("matrix function needs d ≥ 1".into()));
        }
        let mut entries = Vec::with_capacity(d * d);
        for row in table {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "matrix function columns",
                    expected: d,
                    actual: row.len(),
                });
            }
            for c in row {
                if c.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidArgument("matrix function coefficients must be finite".into()));
                }
                entries.push(if c.is_empty() { vec![0.0] } else { c.clone() });
            }
        }
        Ok(Self { d, entries })
    }

    pub fn constant(m: &RMat) -> Self {
        Self {
            d: m.nrows(),
            entries: m.as_slice().iter().map(|&a| vec![a]).collect(),
        }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            d,
            entries: vec![vec![0.0]; d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    fn eval_into(&self, s: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.entries) {
            *o = horner(c, s);
        }
    }

    pub fn eval(&self, s: f64) -> RMat {
        let mut flat = vec![0.0; self.d * self.d];
        self.eval_into(s, &mut flat);
        RMat::from_row_slice(self.d, self.d, &flat)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(|&a| a == 0.0)
    }
}

/// The data of a linear fast–slow system on `[0, t_final]`.
#[derive(Clone, Debug)]
pub struct FastSlowSystem {
    pub model: GeneratorModel,
    pub a: PolyMatrix,
    /// Forcing over rescaled time `α = s / t_final`.
    pub v: Observable,
    pub t_final: f64,
    centered: Observable,
    mean: Vec<Vec<f64>>,
}

/// Terminal values of one run.
#[derive(Clone, Debug)]
pub struct FastSlowRun {
    pub eps: f64,
    pub t_final: f64,
    pub y_eps: Vec<f64>,
    pub y_bar: Vec<f64>,
    /// `(Y_t^ε − y_t)/ε`.
    pub rescaled_error: Vec<f64>,
    /// `U(t_final)`.
    pub u: RMat,
    /// `|(Y − y)/ε − U(t)∫₀ᵗ U(s)⁻¹(v − v̄) ds / ε|_∞`.
    pub duhamel_residual: f64,
    pub final_state: usize,
    pub substeps: usize,
}

impl FastSlowSystem {
    pub fn new(model: GeneratorModel, a: PolyMatrix, v: Observable, t_final: f64) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("t_final must be finite and > 0, got {t_final}")));
        }
        if a.dim() != v.dim() {
            return Err(Error::DimensionMismatch {
                what: "matrix function vs forcing dimension",
                expected: v.dim(),
                actual: a.dim(),
            });
        }
        if v.num_states() != model.n() {
            return Err(Error::DimensionMismatch {
                what: "forcing states vs model states",
                expected: model.n(),
                actual: v.num_states(),
            });
        }
        let centered = v.center(model.nu())?;
        let mean = v.mean(model.nu())?;
        Ok(Self {
            model,
            a,
            v,
            t_final,
            centered,
            mean,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `v − v̄`, which vanishes identically for state-independent forcing.
    pub fn fluctuation(&self) -> &Observable {
        &self.centered
    }

    /// `v̄(α)`.
    pub fn mean_forcing(&self, alpha: f64) -> Vec<f64> {
        self.mean.iter().map(|c| horner(c, alpha)).collect()
    }

    /// The observable whose `S_T` with `T = t/ε` is the rescaled error.
    pub fn duhamel_observable(&self) -> DuhamelObservable<'_> {
        DuhamelObservable { system: self }
    }

    /// Integrates along a given fast path (time measured in fast units, so
    /// the path must cover `t_final / eps`).
    pub fn run_on_path(&self, eps: f64, y0: &[f64], path: &PathSample) -> Result<FastSlowRun> {
        self.run_on_arrays(eps, y0, &path.times, &path.states)
    }

    pub fn run_on_arrays(&self, eps: f64, y0: &[f64], times: &[f64], states: &[usize]) -> Result<FastSlowRun> {
        let d = self.dim();
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("ε must be > 0, got {eps}")));
        }
        if y0.len() != d {
            return Err(Error::DimensionMismatch {
                what: "initial condition",
                expected: d,
                actual: y0.len(),
            });
        }
        let layout = Layout::new(d);
        let mut state = vec![0.0; layout.len];
        state[layout.y..layout.y + d].copy_from_slice(y0);
        for i in 0..d {
            state[layout.u + i * d + i] = 1.0;
            state[layout.w + i * d + i] = 1.0;
        }
        let mut work = Workspace::new(&layout, d);
        let floor = 1e-4 * self.t_final;
        let mut substeps = 0;
        for k in 0..states.len() {
            let start = eps * times[k];
            if start >= self.t_final {
                break;
            }
            let stop = times.get(k + 1).map_or(self.t_final, |&u| (eps * u).min(self.t_final));
            let len = stop - start;
            if len <= 0.0 {
                continue;
            }
            let h_target = (len / 4.0).max(floor);
            let count = libm::ceil(len / h_target).max(1.0) as usize;
            let h = len / count as f64;
            for i in 0..count {
                let s = if i + 1 == count { stop - h } else { start + i as f64 * h };
                self.rk4_step(&layout, &mut work, states[k], s, h, &mut state);
            }
            substeps += count;
        }
        let y_bar = state[layout.y..layout.y + d].to_vec();
        let diff = &state[layout.diff..layout.diff + d];
        let y_eps: Vec<f64> = y_bar.iter().zip(diff).map(|(a, b)| a + b).collect();
        let rescaled_error: Vec<f64> = diff.iter().map(|x| x / eps).collect();
        let u = RMat::from_row_slice(d, d, &state[layout.u..layout.u + d * d]);
        if determinant(&u).abs() < 1e-300 {
            return Err(Error::SingularSystem { pivot: 0 });
        }
        let z = &state[layout.z..layout.z + d];
        let uz = u.mul_vec(z);
        let duhamel_residual = rescaled_error
            .iter()
            .zip(&uz)
            .map(|(r, w)| (r - w / eps).abs())
            .fold(0.0, f64::max);
        if !(duhamel_residual <= DUHAMEL_TOLERANCE) {
            return Err(Error::OdeToleranceFailure {
                estimate: duhamel_residual,
                tolerance: DUHAMEL_TOLERANCE,
            });
        }
        Ok(FastSlowRun {
            eps,
            t_final: self.t_final,
            y_eps,
            y_bar,
            rescaled_error,
            u,
            duhamel_residual,
            final_state: *states.last().unwrap_or(&0),
            substeps,
        })
    }

    fn rhs(&self, layout: &Layout, work: &mut Scratch, x: usize, s: f64, state: &[f64], out: &mut [f64]) {
        let d = layout.d;
        let alpha = (s / self.t_final).clamp(0.0, 1.0);
        self.a.eval_into(s, &mut work.a);
        for (j, m) in work.mean.iter_mut().enumerate() {
            *m = horner(&self.mean[j], alpha);
        }
        for (j, f) in work.fluct.iter_mut().enumerate() {
            *f = horner(self.centered.coeffs(x, j), alpha);
        }
        let a = &work.a;
        for r in 0..d {
            let mut dy = work.mean[r];
            let mut dd = work.fluct[r];
            let mut dz = 0.0;
            for c in 0..d {
                dy += a[r * d + c] * state[layout.y + c];
                dd += a[r * d + c] * state[layout.diff + c];
                dz += state[layout.w + r * d + c] * work.fluct[c];
            }
            out[layout.y + r] = dy;
            out[layout.diff + r] = dd;
            out[layout.z + r] = dz;
            for c in 0..d {
                let mut du = 0.0;
                let mut dw = 0.0;
                for k in 0..d {
                    du += a[r * d + k] * state[layout.u + k * d + c];
                    dw -= state[layout.w + r * d + k] * a[k * d + c];
                }
                out[layout.u + r * d + c] = du;
                out[layout.w + r * d + c] = dw;
            }
        }
    }

    fn rk4_step(&self, layout: &Layout, work: &mut Workspace, x: usize, s: f64, h: f64, state: &mut [f64]) {
        let Workspace { k1, k2, k3, k4, tmp, scratch } = work;
        self.rhs(layout, scratch, x, s, state, k1);
        for i in 0..state.len() {
            tmp[i] = state[i] + 0.5 * h * k1[i];
        }
        self.rhs(layout, scratch, x, s + 0.5 * h, tmp, k2);
        for i in 0..state.len() {
            tmp[i] = state[i] + 0.5 * h * k2[i];
        }
        self.rhs(layout, scratch, x, s + 0.5 * h, tmp, k3);
        for i in 0..state.len() {
            tmp[i] = state[i] + h * k3[i];
        }
        self.rhs(layout, scratch, x, s + h, tmp, k4);
        for i in 0..state.len() {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// `U(t_final) U(s)⁻¹` by RK4 on `dΦ/dr = A(r)Φ`, `Φ(s) = I`.
    pub fn propagator_from(&self, s: f64) -> RMat {
        let d = self.dim();
        let len = self.t_final - s;
        let mut phi = RMat::identity(d);
        if len <= 0.0 {
            return phi;
        }
        let steps = (libm::ceil(PROPAGATOR_STEPS * len / self.t_final) as usize).max(1);
        let h = len / steps as f64;
        for i in 0..steps {
            let r = s + i as f64 * h;
            let a0 = self.a.eval(r);
            let am = self.a.eval(r + 0.5 * h);
            let a1 = self.a.eval(r + h);
            let k1 = a0.matmul(&phi);
            let k2 = am.matmul(&phi.add_mat(&k1.scaled(0.5 * h)));
            let k3 = am.matmul(&phi.add_mat(&k2.scaled(0.5 * h)));
            let k4 = a1.matmul(&phi.add_mat(&k3.scaled(h)));
            let incr = k1.add_mat(&k2.scaled(2.0)).add_mat(&k3.scaled(2.0)).add_mat(&k4);
            phi = phi.add_mat(&incr.scaled(h / 6.0));
        }
        phi
    }
}

/// Offsets of the blocks `[y, D, U, W, Z]` in the flattened ODE state, where
/// `D = Y − y` and `W = U⁻¹`.
struct Layout {
    d: usize,
    y: usize,
    diff: usize,
    u: usize,
    w: usize,
    z: usize,
    len: usize,
}

impl Layout {
    fn new(d: usize) -> Self {
        let y = 0;
        let diff = d;
        let u = 2 * d;
        let w = u + d * d;
        let z = w + d * d;
        Self {
            d,
            y,
            diff,
            u,
            w,
            z,
            len: z + d,
        }
    }
}

struct Scratch {
    a: Vec<f64>,
    mean: Vec<f64>,
    fluct: Vec<f64>,
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    scratch: Scratch,
}

impl Workspace {
    fn new(layout: &Layout, d: usize) -> Self {
        let z = || vec![0.0; layout.len];
        Self {
            k1: z(),
            k2: z(),
            k3: z(),
            k4: z(),
            tmp: z(),
            scratch: Scratch {
                a: vec![0.0; d * d],
                mean: vec![0.0; d],
                fluct: vec![0.0; d],
            },
        }
    }
}

/// Samples `X₀ ~ ν` and a fast path on `[0, t_final/ε]` from replica stream
/// `replica` of `seed`, then integrates the system along it.
pub fn fastslow_run(system: &FastSlowSystem, eps: f64, y0: &[f64], seed: u64, replica: u64) -> Result<FastSlowRun> {
    let mut rng = replica_stream(seed, replica);
    let x0 = sample_initial(&mut rng, system.model.nu());
    let mut times = Vec::new();
    let mut states = Vec::new();
    PathSampler::new(&system.model).sample_into(&mut rng, x0, system.t_final / eps, &mut times, &mut states)?;
    system.run_on_arrays(eps, y0, &times, &states)
}

/// `b(α, x) = U(t)U(αt)⁻¹ (v(α, x) − v̄(α))`, the observable whose additive
/// functional over `T = t/ε` is the rescaled error `(Y − y)/ε`.
#[derive(Clone, Copy, Debug)]
pub struct DuhamelObservable<'a> {
    system: &'a FastSlowSystem,
}

impl ObservableFn for DuhamelObservable<'_> {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn num_states(&self) -> usize {
        self.system.model.n()
    }

    fn eval_all(&self, alpha: f64, out: &mut [f64]) {
        let d = self.dim();
        let phi = self.system.propagator_from(alpha * self.system.t_final);
        let fl = self.system.fluctuation();
        for x in 0..self.num_states() {
            for r in 0..d {
                out[x * d + r] = (0..d).map(|c| phi[(r, c)] * horner(fl.coeffs(x, c), alpha)).sum();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{integrate_s, sample_path};

    fn scalar(a: f64) -> PolyMatrix {
        PolyMatrix::new(&[vec![vec![a]]]).unwrap()
    }

    #[test]
    fn deterministic_forcing_has_no_error() {
        let m = GeneratorModel::symmetric_two_state(1.0);
        let v = Observable::new(1, 2, &[vec![vec![1.0, 2.0], vec![1.0, 2.0]]]).unwrap();
        let sys = FastSlowSystem::new(m, scalar(-1.0), v, 1.0).unwrap();
        let run = fastslow_run(&sys, 0.01, &[0.5], 7, 0).unwrap();
        assert!(run.rescaled_error[0].abs() < 1e-8);
    }

    #[test]
    fn zero_drift_reduces_to_additive_functional() {
        let m = GeneratorModel::symmetric_two_state(1.0);
        let v = Observable::new(1, 2, &[vec![vec![1.0, 1.0], vec![-1.0, 0.5]]]).unwrap();
        let t_final = 2.0;
        let eps = 0.02;
        let sys = FastSlowSystem::new(m.clone(), PolyMatrix::zero(1), v, t_final).unwrap();
        let horizon = t_final / eps;
        let path = sample_path(&m, horizon, 0, 11).unwrap();
        let run = sys.run_on_path(eps, &[0.0], &path).unwrap();
        let s = integrate_s(&path, sys.fluctuation(), horizon).unwrap();
        assert!((run.rescaled_error[0] - s[0]).abs() < 1e-8, "{} vs {}", run.rescaled_error[0], s[0]);
    }

    #[test]
    fn constant_drift_duhamel() {
        let m = GeneratorModel::symmetric_two_state(1.0);
        let v = Observable::constant(&[vec![1.0, -1.0]]).unwrap();
        let sys = FastSlowSystem::new(m, scalar(-0.7), v, 1.0).unwrap();
        let run = fastslow_run(&sys, 1.0 / 200.0, &[1.0], 5, 3).unwrap();
        assert!(run.duhamel_residual <= 1e-6);
        assert!((run.u[(0, 0)] - libm::exp(-0.7)).abs() < 1e-12);
        let phi = sys.propagator_from(0.25);
        assert!((phi[(0, 0)] - libm::exp(-0.7 * 0.75)).abs() < 1e-12);
        // the averaged flow with zero mean forcing is pure decay
        assert!((run.y_bar[0] - libm::exp(-0.7)).abs() < 1e-12);
    }

    #[test]
    fn duhamel_observable_values() {
        let m = GeneratorModel::symmetric_two_state(1.0);
        let v = Observable::constant(&[vec![1.0, -1.0]]).unwrap();
        let sys = FastSlowSystem::new(m, scalar(-1.0), v, 1.0).unwrap();
        let b = sys.duhamel_observable();
        let vals = b.eval_vec(0.5);
        assert!((vals[0] - libm::exp(-0.5)).abs() < 1e-12);
        assert!((vals[1] + libm::exp(-0.5)).abs() < 1e-12);
    }
}
