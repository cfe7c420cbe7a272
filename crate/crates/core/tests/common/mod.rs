//! Independent reference implementations for the integration tests. None
//! of these call into the library's linear algebra.
#![allow(dead_code)]

use markov_llt_core::{CMat, Complex64, GeneratorModel, RMat};

pub fn to_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn generator_rows(model: &GeneratorModel) -> Vec<Vec<f64>> {
    to_rows(model.generator())
}

type C = Complex64;

fn cmul(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Plain Taylor series on `A / 2^s`, then `s` squarings.
pub fn expm_taylor(a: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    let norm: f64 = a.iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a: Vec<Vec<C>> = a.iter().map(|r| r.iter().map(|z| z * scale).collect()).collect();
    let mut term: Vec<Vec<C>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) }).collect())
        .collect();
    let mut sum = term.clone();
    for k in 1..30 {
        term = cmul(&term, &a);
        for r in term.iter_mut() {
            for z in r.iter_mut() {
                *z /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        sum = cmul(&sum, &sum);
    }
    sum
}

/// `exp(G + i·diag(b))` for a frozen scalar-weight vector `b = t·b(α, ·)`.
pub fn twisted_exp(g: &[Vec<f64>], weights: &[f64]) -> Vec<Vec<C>> {
    let n = g.len();
    let a: Vec<Vec<C>> = (0..n)
        .map(|i| (0..n).map(|j| C::new(g[i][j], if i == j { weights[i] } else { 0.0 })).collect())
        .collect();
    expm_taylor(&a)
}

pub fn max_diff(a: &CMat, b: &[Vec<C>]) -> f64 {
    let mut m: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            m = m.max((a[(i, j)] - z).norm());
        }
    }
    m
}

/// Gauss–Jordan with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for k in c..=n {
            m[c][k] /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    m.iter().map(|r| r[n]).collect()
}

/// Stationary law from `νG = 0`, `Σν = 1`.
pub fn stationary(g: &[Vec<f64>]) -> Vec<f64> {
    let n = g.len();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| g[j][i]).collect()).collect();
    a[n - 1] = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    solve(&a, &rhs)
}

/// Asymptotic covariance `lim Var(∫₀ᵀ c(X_s)ds)/T = 2⟨ν, c·h⟩` with
/// `−G h = c`, `⟨ν, h⟩ = 0`, for centered `c`. Entry `(j, k)` symmetrised.
pub fn green_kubo_oracle(g: &[Vec<f64>], c: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = g.len();
    let nu = stationary(g);
    let d = c.len();
    let hs: Vec<Vec<f64>> = c
        .iter()
        .map(|cj| {
            // Replace the last equation by the normalisation ⟨ν, h⟩ = 0.
            let mut a: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
            let mut rhs = cj.clone();
            a[n - 1] = nu.clone();
            rhs[n - 1] = 0.0;
            solve(&a, &rhs)
        })
        .collect();
    (0..d)
        .map(|j| {
            (0..d)
                .map(|k| (0..n).map(|x| nu[x] * (c[j][x] * hs[k][x] + c[k][x] * hs[j][x])).sum())
                .collect()
        })
        .collect()
}
