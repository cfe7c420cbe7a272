//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham 2005).

use super::{Mat, Scalar};
use crate::error::Result;

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn add_scaled<T: Scalar>(acc: &mut Mat<T>, m: &Mat<T>, s: f64) {
    for r in 0..acc.nrows() {
        for c in 0..acc.ncols() {
            acc[(r, c)] += m[(r, c)].scale(s);
        }
    }
}

fn identity_scaled<T: Scalar>(n: usize, s: f64) -> Mat<T> {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = T::from_f64(s);
    }
    m
}

/// Odd/even parts `(U, V)` of the Padé numerator for degrees ≤ 9.
fn pade_low<T: Scalar>(a: &Mat<T>, coeffs: &[f64]) -> (Mat<T>, Mat<T>) {
    let n = a.nrows();
    let a2 = a.matmul(a);
    let mut u_inner = identity_scaled::<T>(n, coeffs[1]);
    let mut v = identity_scaled::<T>(n, coeffs[0]);
    let mut power = a2.clone();
    let mut k = 2;
    while k < coeffs.len() {
        add_scaled(&mut v, &power, coeffs[k]);
        add_scaled(&mut u_inner, &power, coeffs[k + 1]);
        k += 2;
        if k < coeffs.len() {
            power = power.matmul(&a2);
        }
    }
    (a.matmul(&u_inner), v)
}

fn pade_13<T: Scalar>(a: &Mat<T>) -> (Mat<T>, Mat<T>) {
    let n = a.nrows();
    let b = &B13;
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut u_hi = Mat::zeros(n, n);
    add_scaled(&mut u_hi, &a6, b[13]);
    add_scaled(&mut u_hi, &a4, b[11]);
    add_scaled(&mut u_hi, &a2, b[9]);
    let mut u_inner = a6.matmul(&u_hi);
    add_scaled(&mut u_inner, &a6, b[7]);
    add_scaled(&mut u_inner, &a4, b[5]);
    add_scaled(&mut u_inner, &a2, b[3]);
    add_scaled(&mut u_inner, &Mat::identity(n), b[1]);
    let u = a.matmul(&u_inner);

    let mut v_hi = Mat::zeros(n, n);
    add_scaled(&mut v_hi, &a6, b[12]);
    add_scaled(&mut v_hi, &a4, b[10]);
    add_scaled(&mut v_hi, &a2, b[8]);
    let mut v = a6.matmul(&v_hi);
    add_scaled(&mut v, &a6, b[6]);
    add_scaled(&mut v, &a4, b[4]);
    add_scaled(&mut v, &a2, b[2]);
    add_scaled(&mut v, &Mat::identity(n), b[0]);
    (u, v)
}

/// `exp(a)` for a square matrix.
pub fn expm<T: Scalar>(a: &Mat<T>) -> Result<Mat<T>> {
    assert!(a.is_square(), "expm: matrix must be square");
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = a.norm_1();
    if norm == 0.0 {
        return Ok(Mat::identity(n));
    }

    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, coeffs);
            return rational(&u, &v);
        }
    }

    let s = if norm > THETA_13 {
        libm::ceil(libm::log2(norm / THETA_13)) as i32
    } else {
        0
    };
    let scaled = a.map(|x| x.scale(libm::exp2(-(s as f64))));
    let (u, v) = pade_13(&scaled);
    let mut r = rational(&u, &v)?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}

fn rational<T: Scalar>(u: &Mat<T>, v: &Mat<T>) -> Result<Mat<T>> {
    let p = v.add_mat(u);
    let q = v.sub_mat(u);
    Ok(q.lu()?.solve_mat(&p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMat, RMat};
    use num_complex::Complex64;

    #[test]
    fn zero_and_diagonal() {
        let z = RMat::zeros(3, 3);
        assert_eq!(expm(&z).unwrap(), RMat::identity(3));
        for &s in &[0.01, 0.5, 2.0, 20.0] {
            let d = RMat::diag(&[-s, 0.5 * s, s]);
            let e = expm(&d).unwrap();
            for (i, x) in [-s, 0.5 * s, s].iter().enumerate() {
                let exact = libm::exp(*x);
                assert!((e[(i, i)] - exact).abs() <= 1e-13 * exact, "s={s}");
            }
        }
    }

    #[test]
    fn two_state_closed_form() {
        // eigenvalues {0, -2s}: P = ((1 ± e^{-2s}) / 2)
        for &s in &[1e-3, 0.1, 1.0, 3.0, 40.0] {
            let g = RMat::from_row_slice(2, 2, &[-s, s, s, -s]);
            let p = expm(&g).unwrap();
            let e = libm::exp(-2.0 * s);
            assert!((p[(0, 0)] - (1.0 + e) / 2.0).abs() < 1e-14);
            assert!((p[(0, 1)] - (1.0 - e) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_generator() {
        // exp([[0, -θ], [θ, 0]]) is a rotation by θ.
        for &th in &[0.3, 1.7, 9.0] {
            let a = RMat::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
            let r = expm(&a).unwrap();
            assert!((r[(0, 0)] - libm::cos(th)).abs() < 1e-13);
            assert!((r[(1, 0)] - libm::sin(th)).abs() < 1e-13);
        }
    }

    #[test]
    fn complex_scalar_phase() {
        let z = Complex64::new(-0.3, 2.5);
        let a = CMat::diag(&[z, z.conj()]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - z.exp()).norm() < 1e-13);
        assert!((e[(1, 1)] - z.conj().exp()).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn nilpotent() {
        let a = RMat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = expm(&a).unwrap();
        let expected = RMat::from_row_slice(3, 3, &[1.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(e.max_abs_diff(&expected) < 1e-15);
    }
}
