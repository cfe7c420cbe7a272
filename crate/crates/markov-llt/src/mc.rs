//! Parallel Monte Carlo drivers.
//!
//! Replicas are processed in fixed-size chunks. Each replica owns the random
//! stream `(seed, replica)`, chunks are collected in index order and every
//! reduction runs sequentially afterwards, so results are bit-identical for
//! any thread count.

use markov_llt_core::linalg::RMat;
use markov_llt_core::rng::replica_stream;
use markov_llt_core::simulate::{accumulate_s, fastslow_run, sample_initial, FastSlowSystem, NeumaierSum, PathSampler};
use markov_llt_core::{Complex64, GeneratorModel, Observable, Result};
use rayon::prelude::*;

const CHUNK: u64 = 1024;

/// Terminal values `(S, X)` of many independent replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct Endpoints {
    pub d: usize,
    /// `s[i * d + j]` is coordinate `j` of replica `i`.
    pub s: Vec<f64>,
    pub x: Vec<u32>,
}

impl Endpoints {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.s[i * self.d..(i + 1) * self.d]
    }

    fn concat(d: usize, parts: Vec<(Vec<f64>, Vec<u32>)>) -> Self {
        let mut s = Vec::with_capacity(parts.iter().map(|p| p.0.len()).sum());
        let mut x = Vec::with_capacity(parts.iter().map(|p| p.1.len()).sum());
        for (ps, px) in parts {
            s.extend_from_slice(&ps);
            x.extend_from_slice(&px);
        }
        Self { d, s, x }
    }
}

/// Mixes a cell tag into a seed (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn chunk_ranges(reps: u64) -> Vec<(u64, u64)> {
    (0..reps.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(reps)))
        .collect()
}

/// Samples `X₀ ~ μ`, a path on `[0, (1−ρ)T]`, and records
/// `S(ρ, T)` together with `X_{(1−ρ)T}`.
pub fn simulate_endpoints(
    model: &GeneratorModel,
    b: &Observable,
    mu: &[f64],
    horizon: f64,
    rho: f64,
    reps: u64,
    seed: u64,
) -> Result<Endpoints> {
    let sampler = PathSampler::new(model);
    let anti = b.antiderivative();
    let d = b.dim();
    let end = (1.0 - rho) * horizon;
    let parts = chunk_ranges(reps)
        .into_par_iter()
        .map(|(lo, hi)| -> Result<(Vec<f64>, Vec<u32>)> {
            let count = (hi - lo) as usize;
            let mut s = vec![0.0; count * d];
            let mut x = Vec::with_capacity(count);
            let mut times = Vec::new();
            let mut states = Vec::new();
            for (k, replica) in (lo..hi).enumerate() {
                let mut rng = replica_stream(seed, replica);
                let x0 = sample_initial(&mut rng, mu);
                sampler.sample_into(&mut rng, x0, end, &mut times, &mut states)?;
                accumulate_s(&anti, &times, &states, rho, horizon, &mut s[k * d..(k + 1) * d]);
                x.push(*states.last().unwrap() as u32);
            }
            Ok((s, x))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Endpoints::concat(d, parts))
}

/// Rescaled errors `(Y − y)/ε` and terminal states of independent
/// fast–slow runs started from `ν`, plus the worst Duhamel residual.
pub fn simulate_fastslow(system: &FastSlowSystem, eps: f64, y0: &[f64], reps: u64, seed: u64) -> Result<(Endpoints, f64)> {
    let d = system.dim();
    let parts = chunk_ranges(reps)
        .into_par_iter()
        .map(|(lo, hi)| -> Result<(Vec<f64>, Vec<u32>, f64)> {
            let mut s = Vec::with_capacity((hi - lo) as usize * d);
            let mut x = Vec::with_capacity((hi - lo) as usize);
            let mut worst: f64 = 0.0;
            for replica in lo..hi {
                let run = fastslow_run(system, eps, y0, seed, replica)?;
                s.extend_from_slice(&run.rescaled_error);
                x.push(run.final_state as u32);
                worst = worst.max(run.duhamel_residual);
            }
            Ok((s, x, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = parts.iter().map(|p| p.2).fold(0.0, f64::max);
    Ok((Endpoints::concat(d, parts.into_iter().map(|p| (p.0, p.1)).collect()), worst))
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Two-pass mean and standard error, summed in index order.
pub fn mean_se(values: impl Iterator<Item = f64> + Clone) -> MeanSe {
    let mut acc = NeumaierSum::new();
    let mut n = 0usize;
    for v in values.clone() {
        acc.add(v);
        n += 1;
    }
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN };
    }
    let mean = acc.value() / n as f64;
    let mut sq = NeumaierSum::new();
    for v in values {
        sq.add((v - mean) * (v - mean));
    }
    let var = if n > 1 { sq.value() / (n - 1) as f64 } else { 0.0 };
    MeanSe {
        mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Monte Carlo estimate of a complex mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl ComplexEstimate {
    /// `√(se_re² + se_im²)`.
    pub fn se(&self) -> f64 {
        self.se_re.hypot(self.se_im)
    }
}

/// `E[e^{i t·S} f(X)]` over stored endpoints.
pub fn char_function(endpoints: &Endpoints, t: &[f64], f: &[f64]) -> ComplexEstimate {
    let phase = |i: usize| -> f64 { endpoints.value(i).iter().zip(t).map(|(s, tj)| s * tj).sum() };
    let n = endpoints.len();
    let re = mean_se((0..n).map(|i| phase(i).cos() * f[endpoints.x[i] as usize]));
    let im = mean_se((0..n).map(|i| phase(i).sin() * f[endpoints.x[i] as usize]));
    ComplexEstimate {
        mean: Complex64::new(re.mean, im.mean),
        se_re: re.se,
        se_im: im.se,
    }
}

/// Simulates and evaluates `E_μ[e^{i t·S_T} f(X_T)]`.
#[allow(clippy::too_many_arguments)]
pub fn char_function_mc(
    model: &GeneratorModel,
    b: &Observable,
    t: &[f64],
    horizon: f64,
    f: &[f64],
    mu: &[f64],
    reps: u64,
    seed: u64,
) -> Result<ComplexEstimate> {
    let ends = simulate_endpoints(model, b, mu, horizon, 0.0, reps, seed)?;
    Ok(char_function(&ends, t, f))
}

/// `−(1/T) E_ν[S_T^α (S_T^α)ᵀ]` for the observable frozen at `α`, with
/// entrywise standard errors.
#[derive(Clone, Debug)]
pub struct HessianEstimate {
    pub alpha: f64,
    pub horizon: f64,
    pub reps: u64,
    pub mean: RMat,
    pub se: RMat,
}

pub fn hessian_mc(model: &GeneratorModel, b: &Observable, alpha: f64, horizon: f64, reps: u64, seed: u64) -> Result<HessianEstimate> {
    let frozen = b.frozen(alpha)?;
    let ends = simulate_endpoints(model, &frozen, model.nu(), horizon, 0.0, reps, seed)?;
    let d = b.dim();
    let mut mean = RMat::zeros(d, d);
    let mut se = RMat::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            let est = mean_se((0..ends.len()).map(|i| {
                let v = ends.value(i);
                -v[j] * v[k] / horizon
            }));
            mean[(j, k)] = est.mean;
            se[(j, k)] = est.se;
        }
    }
    Ok(HessianEstimate {
        alpha,
        horizon,
        reps,
        mean,
        se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_count_does_not_change_results() {
        let m = GeneratorModel::symmetric_two_state(1.0);
        let b = Observable::constant(&[vec![1.0, -1.0]]).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_endpoints(&m, &b, &[1.0, 0.0], 20.5, 0.0, 3000, 17).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn zero_frequency_and_conjugation() {
        let m = GeneratorModel::symmetric_two_state(1.0);
        let b = Observable::constant(&[vec![1.0, -1.0]]).unwrap();
        let ends = simulate_endpoints(&m, &b, m.nu(), 8.0, 0.0, 500, 3).unwrap();
        let one = char_function(&ends, &[0.0], &[1.0, 1.0]);
        assert_eq!(one.mean, Complex64::new(1.0, 0.0));
        assert_eq!(one.se(), 0.0);
        let plus = char_function(&ends, &[0.7], &[1.0, 0.0]);
        let minus = char_function(&ends, &[-0.7], &[1.0, 0.0]);
        assert_eq!(plus.mean.conj(), minus.mean);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}
