//! Dense eigenvalue routines: complex Hessenberg QR for general matrices,
//! inverse iteration for single eigenvectors, and cyclic Jacobi for real
//! symmetric matrices.

use alloc::vec::Vec;

use num_complex::Complex64;

use super::{CMat, RMat, Scalar};
use crate::error::{Error, Result};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

fn hessenberg(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut h = a.clone();
    if n < 3 {
        return h;
    }
    for k in 0..n - 2 {
        let len = n - k - 1;
        let x: Vec<Complex64> = (0..len).map(|i| h[(k + 1 + i, k)]).collect();
        let xnorm = libm::sqrt(x.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if xnorm == 0.0 {
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        // H <- (I - 2 v v^H) H
        for j in 0..n {
            let w: Complex64 = (0..len).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            for i in 0..len {
                h[(k + 1 + i, j)] -= v[i] * w * 2.0;
            }
        }
        // H <- H (I - 2 v v^H)
        for i in 0..n {
            let w: Complex64 = (0..len).map(|j| h[(i, k + 1 + j)] * v[j]).sum();
            for j in 0..len {
                h[(i, k + 1 + j)] -= w * v[j].conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
    h
}

fn eig2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5) * ((a - d) * 0.5) + b * c;
    let root = disc.sqrt();
    (half_tr + root, half_tr - root)
}

/// Givens rotation `[c, s; -s̄, c]` mapping `(a, b)` to `(r, 0)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let nrm = libm::hypot(na, nb);
    let c = na / nrm;
    let s = (a / na) * b.conj() / nrm;
    (c, s)
}

/// All eigenvalues of a square complex matrix, in deflation order.
pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    let mut h = hessenberg(a);
    let norm = h.max_abs().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    loop {
        if hi == 0 {
            out.push(h[(0, 0)]);
            break;
        }
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let local = h[(l, l)].norm() + h[(l - 1, l - 1)].norm();
            if sub <= eps * local || sub <= eps * eps * norm {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            out.push(h[(hi, hi)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        if l + 1 == hi {
            let (e1, e2) = eig2(h[(l, l)], h[(l, hi)], h[(hi, l)], h[(hi, hi)]);
            out.push(e1);
            out.push(e2);
            if l == 0 {
                break;
            }
            hi = l - 1;
            iter = 0;
            continue;
        }

        iter += 1;
        total += 1;
        if iter > MAX_SWEEPS_PER_EIGENVALUE {
            return Err(Error::NonConvergence { iterations: total });
        }
        let mu = if iter.is_multiple_of(11) {
            // exceptional shift
            h[(hi, hi)] + Complex64::new(h[(hi, hi - 1)].norm() * 0.75, h[(hi - 1, hi - 2)].norm())
        } else {
            let d = h[(hi, hi)];
            let (e1, e2) = eig2(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], d);
            if (e1 - d).norm() <= (e2 - d).norm() {
                e1
            } else {
                e2
            }
        };

        for k in l..=hi {
            h[(k, k)] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            rotations.push((c, s));
        }
        for (idx, &(c, s)) in rotations.iter().enumerate() {
            let k = l + idx;
            let last = (k + 2).min(hi);
            for i in l..=last {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + s.conj() * y;
                h[(i, k + 1)] = -s * x + y * c;
            }
        }
        for k in l..=hi {
            h[(k, k)] += mu;
        }
    }
    Ok(out)
}

/// Right eigenvector of `a` for an (approximate) eigenvalue `lambda`,
/// normalised to unit sup norm.
pub fn inverse_iteration(a: &CMat, lambda: Complex64) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let scale = a.max_abs().max(1.0);
    let mut shift = lambda + Complex64::new(1e-11, 1e-11) * scale;
    let mut lu = None;
    for _ in 0..8 {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        match m.lu() {
            Ok(f) => {
                lu = Some(f);
                break;
            }
            Err(_) => shift += Complex64::new(1e-9, 1e-9) * scale,
        }
    }
    let lu = lu.ok_or(Error::NonConvergence { iterations: 8 })?;
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0, 0.0) + Complex64::new(0.0, 1e-3) * (i as f64))
        .collect();
    for _ in 0..4 {
        x = lu.solve(&x);
        let m = super::sup_norm(&x);
        if !(m.is_finite()) || m == 0.0 {
            return Err(Error::NonConvergence { iterations: 4 });
        }
        for z in &mut x {
            *z = z.scale(1.0 / m);
        }
    }
    Ok(x)
}

/// Eigenvalues of a real symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: &RMat) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut m = a.clone();
    for sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        if sweep == 99 {
            return Err(Error::NonConvergence { iterations: 100 });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    Ok(ev)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted_by_modulus(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
        v
    }

    #[test]
    fn diagonal_and_triangular() {
        let a = CMat::diag(&[c(0.5, 0.0), c(0.2, 0.0)]);
        let ev = sorted_by_modulus(eigenvalues(&a).unwrap());
        assert!((ev[0] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((ev[1] - c(0.2, 0.0)).norm() < 1e-15);

        let nil = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        for e in eigenvalues(&nil).unwrap() {
            assert!(e.norm() < 1e-15);
        }
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let a = RMat::from_row_slice(
            4,
            4,
            &[10.0, -35.0, 50.0, -24.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        )
        .to_complex();
        let mut ev: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, exact) in ev.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((e - exact).abs() < 1e-9, "{ev:?}");
        }
    }

    #[test]
    fn complex_pair_and_trace() {
        // rotation-scaling with eigenvalues 2 ± 3i, embedded in a 5x5 similarity
        let n = 5;
        let mut d = CMat::zeros(n, n);
        d[(0, 0)] = c(2.0, 0.0);
        d[(0, 1)] = c(-3.0, 0.0);
        d[(1, 0)] = c(3.0, 0.0);
        d[(1, 1)] = c(2.0, 0.0);
        d[(2, 2)] = c(-1.0, 0.5);
        d[(3, 3)] = c(0.25, 0.0);
        d[(4, 4)] = c(0.0, -2.0);
        let s = CMat::from_fn(n, n, |i, j| c(1.0 / (1.0 + i as f64 + j as f64), if i == j { 1.0 } else { 0.1 }));
        let sinv = s.lu().unwrap().solve_mat(&CMat::identity(n));
        let a = s.matmul(&d).matmul(&sinv);
        let ev = eigenvalues(&a).unwrap();
        let expected = [c(2.0, 3.0), c(2.0, -3.0), c(-1.0, 0.5), c(0.25, 0.0), c(0.0, -2.0)];
        for e in expected {
            let best = ev.iter().map(|z| (z - e).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "{e} not found in {ev:?}");
        }
    }

    #[test]
    fn inverse_iteration_finds_dominant_vector() {
        let a = RMat::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7]).to_complex();
        let v = inverse_iteration(&a, c(1.0, 0.0)).unwrap();
        let av = a.mul_vec(&v);
        for (x, y) in av.iter().zip(&v) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobi_symmetric() {
        let a = RMat::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let ev = symmetric_eigenvalues(&a).unwrap();
        let s2 = core::f64::consts::SQRT_2;
        for (e, exact) in ev.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((e - exact).abs() < 1e-13);
        }
    }
}
