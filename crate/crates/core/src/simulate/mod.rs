//! Exact path sampling of the chain and closed-form path functionals.

mod fastslow;

pub use fastslow::{fastslow_run, DuhamelObservable, DUHAMEL_TOLERANCE, FastSlowRun, FastSlowSystem, PolyMatrix};

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::model::GeneratorModel;
use crate::observable::{horner, Observable};
use crate::rng::{categorical, exponential, replica_stream};

/// Neumaier's compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// A piecewise-constant path on `[0, horizon]`: the chain sits in
/// `states[k]` on `[times[k], times[k+1])`, with `times[0] = 0` and the last
/// interval closed by `horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    pub x0: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl PathSample {
    pub fn jumps(&self) -> usize {
        self.states.len() - 1
    }

    /// State at time `s` (right-continuous).
    pub fn state_at(&self, s: f64) -> usize {
        let k = self.times.partition_point(|&u| u <= s);
        self.states[k.saturating_sub(1)]
    }

    pub fn final_state(&self) -> usize {
        *self.states.last().expect("paths have at least one state")
    }

    /// Time spent in each state.
    pub fn occupation(&self, n: usize) -> Vec<f64> {
        let mut occ = alloc::vec![0.0; n];
        for k in 0..self.states.len() {
            let end = self.times.get(k + 1).copied().unwrap_or(self.horizon);
            occ[self.states[k]] += end - self.times[k];
        }
        occ
    }
}

/// Gillespie sampler with precomputed exit rates and jump weights.
#[derive(Clone, Debug)]
pub struct PathSampler {
    exit: Vec<f64>,
    jump_weights: Vec<Vec<f64>>,
}

impl PathSampler {
    pub fn new(model: &GeneratorModel) -> Self {
        let g = model.generator();
        let n = model.n();
        let exit = (0..n).map(|x| -g[(x, x)]).collect();
        let jump_weights = (0..n)
            .map(|x| (0..n).map(|y| if y == x { 0.0 } else { g[(x, y)] }).collect())
            .collect();
        Self { exit, jump_weights }
    }

    pub fn num_states(&self) -> usize {
        self.exit.len()
    }

    /// Fills `times`/`states` with a path on `[0, horizon]` started at `x0`.
    pub fn sample_into<R: RngCore + ?Sized>(
        &self,
        rng: &mut R,
        x0: usize,
        horizon: f64,
        times: &mut Vec<f64>,
        states: &mut Vec<usize>,
    ) -> Result<()> {
        times.clear();
        states.clear();
        times.push(0.0);
        states.push(x0);
        if self.num_states() == 1 {
            return Ok(());
        }
        let mut x = x0;
        let mut now = 0.0;
        loop {
            let rate = self.exit[x];
            if !(rate > 0.0) {
                return Err(Error::AbsorbingState { state: x });
            }
            now += exponential(rng, rate);
            if now >= horizon {
                return Ok(());
            }
            x = categorical(rng, &self.jump_weights[x], rate);
            times.push(now);
            states.push(x);
        }
    }
}

/// Draws a state from the probability vector `mu`.
pub fn sample_initial<R: RngCore + ?Sized>(rng: &mut R, mu: &[f64]) -> usize {
    categorical(rng, mu, mu.iter().sum())
}

/// One path from replica stream 0 of `seed`.
pub fn sample_path(model: &GeneratorModel, horizon: f64, x0: usize, seed: u64) -> Result<PathSample> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("horizon must be finite and > 0, got {horizon}")));
    }
    if x0 >= model.n() {
        return Err(Error::InvalidArgument(alloc::format!("initial state {x0} outside 0..{}", model.n())));
    }
    let mut rng = replica_stream(seed, 0);
    let mut times = Vec::new();
    let mut states = Vec::new();
    PathSampler::new(model).sample_into(&mut rng, x0, horizon, &mut times, &mut states)?;
    Ok(PathSample {
        times,
        states,
        x0,
        horizon,
        seed,
    })
}

/// `S(ρ, T) = ∫₀^{(1−ρ)T} b(ρ + s/T, X_s) ds` on the raw path arrays, using
/// the antiderivative `anti` of `b`. Writes `d` coordinates into `out`.
pub fn accumulate_s(
    anti: &Observable,
    times: &[f64],
    states: &[usize],
    rho: f64,
    horizon: f64,
    out: &mut [f64],
) {
    let d = anti.dim();
    let end = (1.0 - rho) * horizon;
    for (j, o) in out.iter_mut().enumerate().take(d) {
        let mut acc = NeumaierSum::new();
        for k in 0..states.len() {
            let start = times[k];
            if start >= end {
                break;
            }
            let stop = times.get(k + 1).copied().unwrap_or(end).min(end);
            let c = anti.coeffs(states[k], j);
            let hi = horner(c, rho + stop / horizon);
            let lo = horner(c, rho + start / horizon);
            acc.add(hi - lo);
        }
        *o = horizon * acc.value();
    }
}

/// `S_T = ∫₀ᵀ b(s/T, X_s) ds`, exact for polynomial `b`.
pub fn integrate_s(path: &PathSample, b: &Observable, horizon: f64) -> Result<Vec<f64>> {
    if path.horizon != horizon {
        return Err(Error::HorizonMismatch {
            path: path.horizon,
            requested: horizon,
        });
    }
    integrate_s_rho(path, b, 0.0, horizon)
}

/// `S(ρ, T) = ∫₀^{(1−ρ)T} b(ρ + s/T, X_s) ds`; `ρ = 0` is `S_T`.
pub fn integrate_s_rho(path: &PathSample, b: &Observable, rho: f64, horizon: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(alloc::format!("ρ must lie in [0, 1), got {rho}")));
    }
    let end = (1.0 - rho) * horizon;
    if path.horizon < end {
        return Err(Error::HorizonMismatch {
            path: path.horizon,
            requested: end,
        });
    }
    if b.num_states() <= *path.states.iter().max().unwrap_or(&0) {
        return Err(Error::DimensionMismatch {
            what: "observable states vs path states",
            expected: path.states.iter().max().unwrap_or(&0) + 1,
            actual: b.num_states(),
        });
    }
    let anti = b.antiderivative();
    let mut out = alloc::vec![0.0; b.dim()];
    accumulate_s(&anti, &path.times, &path.states, rho, horizon, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_state_is_constant() {
        let m = GeneratorModel::from_rates(1, &[]).unwrap();
        let p = sample_path(&m, 50.0, 0, 1).unwrap();
        assert_eq!(p.jumps(), 0);
        let b = Observable::new(1, 1, &[vec![vec![0.0, 1.0]]]).unwrap();
        assert!((integrate_s(&p, &b, 50.0).unwrap()[0] - 25.0).abs() < 1e-12);
    }

    #[test]
    fn constant_observable_gives_c_times_t() {
        let m = GeneratorModel::symmetric_two_state(1.0);
        let p = sample_path(&m, 37.5, 1, 9).unwrap();
        let b = Observable::constant(&[vec![2.5, 2.5]]).unwrap();
        assert!((integrate_s(&p, &b, 37.5).unwrap()[0] - 2.5 * 37.5).abs() < 1e-10);
    }

    #[test]
    fn path_invariants_and_reproducibility() {
        let m = GeneratorModel::from_rates(3, &[(0, 1, 1.0), (1, 2, 0.5), (2, 0, 2.0)]).unwrap();
        let a = sample_path(&m, 100.0, 0, 42).unwrap();
        let b = sample_path(&m, 100.0, 0, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.times.windows(2).all(|w| w[0] < w[1]));
        assert!(a.times.iter().all(|&t| t < 100.0));
        assert!(a.states.windows(2).all(|w| w[0] != w[1]));
        let occ: f64 = a.occupation(3).iter().sum();
        assert!((occ - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rho_zero_is_bitwise_s_t() {
        let m = GeneratorModel::symmetric_two_state(1.0);
        let p = sample_path(&m, 64.25, 0, 3).unwrap();
        let b = Observable::new(1, 2, &[vec![vec![1.0, -2.0, 0.5], vec![-1.0, 2.0, -0.5]]]).unwrap();
        let s = integrate_s(&p, &b, 64.25).unwrap();
        let r = integrate_s_rho(&p, &b, 0.0, 64.25).unwrap();
        assert_eq!(s[0].to_bits(), r[0].to_bits());
        assert!(integrate_s(&p, &b, 60.0).is_err());
    }

    #[test]
    fn absorbing_state_is_reported() {
        let g = crate::linalg::RMat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]);
        let sampler = PathSampler {
            exit: (0..2).map(|x| -g[(x, x)]).collect(),
            jump_weights: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
        };
        let mut rng = replica_stream(0, 0);
        let (mut t, mut s) = (Vec::new(), Vec::new());
        assert!(matches!(
            sampler.sample_into(&mut rng, 0, 1e6, &mut t, &mut s),
            Err(Error::AbsorbingState { state: 1 })
        ));
    }

    #[test]
    fn neumaier_beats_naive() {
        let mut s = NeumaierSum::new();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }
}
