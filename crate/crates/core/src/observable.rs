//! Vector observables `b(α, x) ∈ ℝ^d` that are polynomials in the slow
//! time `α ∈ [0, 1]` for every state `x`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, RMat};

pub const DEFAULT_DEGREE_CAP: usize = 16;

/// Anything that can be evaluated as `b(α, ·)` on all states at once.
///
/// The kernel, spectral and variance code is written against this trait so
/// that non-polynomial observables (such as the fundamental-matrix weighted
/// forcing of a linear fast–slow system) reuse the same machinery.
pub trait ObservableFn {
    fn dim(&self) -> usize;
    fn num_states(&self) -> usize;
    /// Writes `b(α, x)_j` into `out[x * d + j]`.
    fn eval_all(&self, alpha: f64, out: &mut [f64]);

    fn eval_vec(&self, alpha: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim() * self.num_states()];
        self.eval_all(alpha, &mut out);
        out
    }
}

impl<T: ObservableFn + ?Sized> ObservableFn for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_states(&self) -> usize {
        (**self).num_states()
    }
    fn eval_all(&self, alpha: f64, out: &mut [f64]) {
        (**self).eval_all(alpha, out)
    }
}

/// Polynomial-in-α observable. `coeffs[x * d + j]` holds the ascending
/// coefficients of `α ↦ b(α, x)_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    d: usize,
    n: usize,
    coeffs: Vec<Vec<f64>>,
    centered: bool,
}

#[inline]
pub(crate) fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange { alpha })
    }
}

/// Rank of a span check at one α.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanRow {
    pub alpha: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanReport {
    pub dim: usize,
    pub rows: Vec<SpanRow>,
}

impl SpanReport {
    pub fn spans(&self) -> bool {
        self.rows.iter().all(|r| r.rank == self.dim)
    }
}

impl Observable {
    /// `table[j][x]` is the coefficient list of coordinate `j` on state `x`.
    pub fn new(d: usize, n: usize, table: &[Vec<Vec<f64>>]) -> Result<Self> {
        Self::with_degree_cap(d, n, table, DEFAULT_DEGREE_CAP)
    }

    pub fn with_degree_cap(d: usize, n: usize, table: &[Vec<Vec<f64>>], cap: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::InvalidArgument("observable needs d ≥ 1 and n ≥ 1".into()));
        }
        if table.len() != d {
            return Err(Error::DimensionMismatch {
                what: "observable coordinates",
                expected: d,
                actual: table.len(),
            });
        }
        let mut coeffs = vec![Vec::new(); n * d];
        for (j, per_state) in table.iter().enumerate() {
            if per_state.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "observable states",
                    expected: n,
                    actual: per_state.len(),
                });
            }
            for (x, c) in per_state.iter().enumerate() {
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("observable coefficients must be finite".into()));
                }
                let degree = c.len().saturating_sub(1);
                if degree > cap {
                    return Err(Error::DegreeTooHigh { degree, cap });
                }
                coeffs[x * d + j] = if c.is_empty() { vec![0.0] } else { c.clone() };
            }
        }
        Ok(Self {
            d,
            n,
            coeffs,
            centered: false,
        })
    }

    /// `b ≡ 0`.
    pub fn zero(d: usize, n: usize) -> Self {
        Self {
            d,
            n,
            coeffs: vec![vec![0.0]; n * d],
            centered: true,
        }
    }

    /// α-independent observable, `values[j][x]`.
    pub fn constant(values: &[Vec<f64>]) -> Result<Self> {
        let d = values.len();
        let n = values.first().map_or(0, Vec::len);
        let table: Vec<Vec<Vec<f64>>> = values.iter().map(|row| row.iter().map(|&v| vec![v]).collect()).collect();
        Self::new(d, n, &table)
    }

    /// Scalar observable `b(α, x) = c(α) · w(x)` for a polynomial `c`.
    pub fn separable(weights: &[f64], c: &[f64]) -> Result<Self> {
        let table = vec![weights.iter().map(|&w| c.iter().map(|&a| a * w).collect()).collect()];
        Self::new(1, weights.len(), &table)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn coeffs(&self, x: usize, j: usize) -> &[f64] {
        &self.coeffs[x * self.d + j]
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().map(|c| c.len() - 1).max().unwrap_or(0)
    }

    pub fn evaluate(&self, alpha: f64, x: usize) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        self.check_state(x)?;
        Ok((0..self.d).map(|j| horner(self.coeffs(x, j), alpha)).collect())
    }

    pub fn derivative_alpha(&self, alpha: f64, x: usize, order: u32) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        self.check_state(x)?;
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidArgument("derivative order must be 1 or 2".into()));
        }
        Ok((0..self.d)
            .map(|j| {
                let mut c = self.coeffs(x, j).to_vec();
                for _ in 0..order {
                    c = differentiate(&c);
                }
                horner(&c, alpha)
            })
            .collect())
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!("state {x} outside 0..{}", self.n)))
        }
    }

    /// `Σ_x ν(x) b(·, x)_j` as polynomials in α, one per coordinate.
    pub fn mean(&self, nu: &[f64]) -> Result<Vec<Vec<f64>>> {
        if nu.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "invariant measure",
                expected: self.n,
                actual: nu.len(),
            });
        }
        let len = self.degree() + 1;
        let mut means = vec![vec![0.0; len]; self.d];
        for x in 0..self.n {
            for j in 0..self.d {
                for (k, &c) in self.coeffs(x, j).iter().enumerate() {
                    means[j][k] += nu[x] * c;
                }
            }
        }
        Ok(means)
    }

    /// `b − ⟨ν, b⟩`, coefficient-wise. Already-centered input is returned
    /// unchanged.
    pub fn center(&self, nu: &[f64]) -> Result<Self> {
        let means = self.mean(nu)?;
        if self.centered {
            return Ok(self.clone());
        }
        let mut coeffs = self.coeffs.clone();
        for x in 0..self.n {
            for j in 0..self.d {
                let c = &mut coeffs[x * self.d + j];
                let m = &means[j];
                if c.len() < m.len() {
                    c.resize(m.len(), 0.0);
                }
                for (ck, mk) in c.iter_mut().zip(m) {
                    *ck -= mk;
                }
            }
        }
        Ok(Self {
            d: self.d,
            n: self.n,
            coeffs,
            centered: true,
        })
    }

    /// Coefficient-wise check of `|Σ_x ν(x) b(α,x)_j| ≤ tol`.
    pub fn is_centered_under(&self, nu: &[f64], tol: f64) -> Result<bool> {
        Ok(self.mean(nu)?.iter().flatten().all(|m| m.abs() <= tol))
    }

    /// Rank of the `d × n` matrix `[b(α, x)]_x` on each α of the grid.
    pub fn span_check(&self, alphas: &[f64]) -> Result<SpanReport> {
        let mut rows = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            check_alpha(alpha)?;
            let vals = self.eval_vec(alpha);
            let gram = RMat::from_fn(self.d, self.d, |i, k| {
                (0..self.n).map(|x| vals[x * self.d + i] * vals[x * self.d + k]).sum()
            });
            let mut sv: Vec<f64> = symmetric_eigenvalues(&gram)?
                .into_iter()
                .rev()
                .map(|e| libm::sqrt(e.max(0.0)))
                .collect();
            sv.iter_mut().for_each(|s| *s = if s.is_finite() { *s } else { 0.0 });
            let top = sv.first().copied().unwrap_or(0.0);
            let tol = 1e-9 * top.max(f64::MIN_POSITIVE);
            let rank = if top == 0.0 { 0 } else { sv.iter().filter(|&&s| s > tol).count() };
            rows.push(SpanRow {
                alpha,
                rank,
                singular_values: sv,
            });
        }
        Ok(SpanReport { dim: self.d, rows })
    }

    /// Antiderivatives `A(α) = ∫₀^α b(a, x) da`, coefficient-wise.
    pub fn antiderivative(&self) -> Self {
        Self {
            d: self.d,
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| integrate_poly(c)).collect(),
            centered: false,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            d: self.d,
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c.iter().map(|a| a * factor).collect()).collect(),
            centered: self.centered,
        }
    }

    /// The α-independent observable `x ↦ b(alpha, x)`.
    pub fn frozen(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            d: self.d,
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| vec![horner(c, alpha)]).collect(),
            centered: self.centered,
        })
    }

    /// Every coefficient is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().flatten().all(|&a| a == 0.0)
    }

    /// `sup_{α∈[0,1], x} |b(α, x)_j|` bounded by the coefficient ℓ¹ norm.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.iter().map(|a| a.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

impl ObservableFn for Observable {
    fn dim(&self) -> usize {
        self.d
    }
    fn num_states(&self) -> usize {
        self.n
    }
    fn eval_all(&self, alpha: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.coeffs) {
            *o = horner(c, alpha);
        }
    }
}

pub(crate) fn differentiate(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect()
}

pub(crate) fn integrate_poly(c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(0.0);
    out.extend(c.iter().enumerate().map(|(k, &a)| a / (k as f64 + 1.0)));
    out
}
