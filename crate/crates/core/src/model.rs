//! Finite-state continuous-time Markov chains: generator validation,
//! invariant measure, transition semigroup and the mixing certificate.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{expm, RMat};

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARITY_TOL: f64 = 1e-10;

/// An irreducible rate matrix together with its invariant law.
#[derive(Clone, Debug)]
pub struct GeneratorModel {
    labels: Vec<String>,
    generator: RMat,
    nu: Vec<f64>,
}

/// `P(s) = exp(sG)`; row `x` is the law of `X_s` started at `x`.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub s: f64,
    pub p: RMat,
}

/// Checks that `g` is a conservative, irreducible generator. Returns the
/// skeleton model (generator plus labels, no invariant law yet).
pub fn validate_generator(g: &RMat) -> Result<ValidatedGenerator> {
    if !g.is_square() {
        return Err(Error::NotSquare {
            rows: g.nrows(),
            cols: g.ncols(),
        });
    }
    let n = g.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("generator must have at least one state".into()));
    }
    for x in 0..n {
        for y in 0..n {
            let rate = g[(x, y)];
            if !rate.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite rate at ({x}, {y})")));
            }
            if x != y && rate < 0.0 {
                return Err(Error::NegativeRate { from: x, to: y, rate });
            }
        }
        let row = g.row(x);
        let sum: f64 = row.iter().sum();
        let scale = row.iter().fold(1.0_f64, |m, r| m.max(r.abs()));
        if sum.abs() > ROW_SUM_TOL * scale {
            return Err(Error::NonConservative { row: x, sum });
        }
    }
    if let Some(reason) = irreducibility_violation(g) {
        return Err(Error::Reducible { reason });
    }
    Ok(ValidatedGenerator { generator: g.clone() })
}

/// A generator that passed [`validate_generator`]; ν not yet computed.
#[derive(Clone, Debug)]
pub struct ValidatedGenerator {
    generator: RMat,
}

impl ValidatedGenerator {
    pub fn generator(&self) -> &RMat {
        &self.generator
    }
}

/// Strong connectivity of the positive-rate graph: every state reaches
/// state 0 and is reached from it.
fn irreducibility_violation(g: &RMat) -> Option<String> {
    let n = g.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for y in 0..n {
                let rate = if forward { g[(x, y)] } else { g[(y, x)] };
                if y != x && rate > 0.0 && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    };
    if let Some(y) = reach(true).iter().position(|&s| !s) {
        return Some(format!("state {y} is not reachable from state 0"));
    }
    if let Some(y) = reach(false).iter().position(|&s| !s) {
        return Some(format!("state 0 is not reachable from state {y}"));
    }
    None
}

/// Invariant law of a validated generator: solves `νG = 0`, `Σν = 1`
/// directly (the last balance equation is replaced by normalisation).
pub fn invariant_measure(model: &ValidatedGenerator) -> Result<Vec<f64>> {
    let g = &model.generator;
    let n = g.nrows();
    // Aᵀ νᵀ = e_n where A is G with its last column replaced by ones.
    let at = RMat::from_fn(n, n, |r, c| if r == n - 1 { 1.0 } else { g[(c, r)] });
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let lu = at.lu().map_err(|_| Error::Reducible {
        reason: "null space of Gᵀ has dimension > 1".into(),
    })?;
    let mut nu = lu.solve(&rhs);
    for p in &mut nu {
        if *p < 0.0 && *p > -1e-14 {
            *p = 0.0;
        }
    }
    let total: f64 = nu.iter().sum();
    for p in &mut nu {
        *p /= total;
    }
    if nu.iter().any(|&p| p <= 0.0) {
        return Err(Error::Reducible {
            reason: "invariant measure is not strictly positive".into(),
        });
    }
    let residual = crate::linalg::sup_norm(&g.vec_mul(&nu));
    if residual > STATIONARITY_TOL {
        return Err(Error::Reducible {
            reason: format!("νG residual {residual:e} exceeds tolerance"),
        });
    }
    Ok(nu)
}

impl GeneratorModel {
    /// Validates `g` and computes its invariant law. Labels default to
    /// `"0"`, `"1"`, ….
    pub fn new(g: RMat) -> Result<Self> {
        let labels = (0..g.nrows()).map(|i| format!("{i}")).collect();
        Self::with_labels(g, labels)
    }

    pub fn with_labels(g: RMat, labels: Vec<String>) -> Result<Self> {
        if labels.len() != g.nrows() {
            return Err(Error::DimensionMismatch {
                what: "state labels",
                expected: g.nrows(),
                actual: labels.len(),
            });
        }
        let validated = validate_generator(&g)?;
        let nu = invariant_measure(&validated)?;
        Ok(Self {
            labels,
            generator: validated.generator,
            nu,
        })
    }

    /// Builds the generator from `(from, to, rate)` triples; diagonal
    /// entries are filled in so rows sum to zero.
    pub fn from_rates(n: usize, rates: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = RMat::zeros(n, n);
        for &(from, to, rate) in rates {
            if from >= n || to >= n {
                return Err(Error::InvalidArgument(format!("rate ({from} -> {to}) names a state outside 0..{n}")));
            }
            if from == to {
                return Err(Error::InvalidArgument(format!("self-transition rate on state {from}")));
            }
            g[(from, to)] += rate;
        }
        for x in 0..n {
            let off: f64 = (0..n).filter(|&y| y != x).map(|y| g[(x, y)]).sum();
            g[(x, x)] = -off;
        }
        Self::new(g)
    }

    /// Symmetric two-state chain with both rates equal to `rate`.
    pub fn symmetric_two_state(rate: f64) -> Self {
        Self::from_rates(2, &[(0, 1, rate), (1, 0, rate)]).expect("two-state chain is valid")
    }

    pub fn n(&self) -> usize {
        self.generator.nrows()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn generator(&self) -> &RMat {
        &self.generator
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Largest total exit rate `max_x −G[x,x]`.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.n()).map(|x| -self.generator[(x, x)]).fold(0.0, f64::max)
    }

    /// The same chain observed on a time scale `m` times slower: `G ← mG`.
    pub fn rescaled(&self, m: f64) -> Self {
        Self {
            labels: self.labels.clone(),
            generator: self.generator.scaled(m),
            nu: self.nu.clone(),
        }
    }

    pub fn transition_matrix(&self, s: f64) -> Result<TransitionMatrix> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("transition time must be finite and ≥ 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(TransitionMatrix {
                s,
                p: RMat::identity(self.n()),
            });
        }
        let p = expm(&self.generator.scaled(s))?;
        Ok(TransitionMatrix { s, p })
    }

    /// `sup_x TV(P(time, x, ·), ν)`; the chain mixes in the sense of a
    /// Doeblin contraction iff this is `< 1`.
    pub fn ergodicity_certificate(&self, time: f64) -> Result<f64> {
        let p = self.transition_matrix(time)?.p;
        Ok(sup_total_variation(&p, &self.nu))
    }

    /// Smallest `𝒯 = 2^k` (k ≥ −20) whose certificate is `≤ target`.
    pub fn dyadic_mixing_time(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::InvalidArgument(format!("mixing target must lie in (0, 1), got {target}")));
        }
        let mut k = -20i32;
        loop {
            let time = libm::exp2(k as f64);
            if self.ergodicity_certificate(time)? <= target {
                return Ok(time);
            }
            k += 1;
            if k > 60 {
                return Err(Error::NonConvergence { iterations: 80 });
            }
        }
    }

    /// Smallest integer `m ≥ 1` with `‖P_m − 1⊗ν‖ = 2·certificate(m) ≤ target_norm`.
    pub fn rebase_sampling(&self, target_norm: f64) -> Result<u64> {
        if !(target_norm > 0.0) {
            return Err(Error::InvalidArgument(format!("target norm must be positive, got {target_norm}")));
        }
        let ok = |m: u64| -> Result<bool> { Ok(2.0 * self.ergodicity_certificate(m as f64)? <= target_norm) };
        if ok(1)? {
            return Ok(1);
        }
        let mut hi = 2u64;
        while !ok(hi)? {
            hi = hi.checked_mul(2).ok_or(Error::NonConvergence { iterations: 64 })?;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// `max_x ½ Σ_y |p[x,y] − ν[y]|`.
pub fn sup_total_variation(p: &RMat, nu: &[f64]) -> f64 {
    (0..p.nrows())
        .map(|x| 0.5 * p.row(x).iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
