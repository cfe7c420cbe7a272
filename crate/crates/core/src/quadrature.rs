//! Gauss–Legendre quadrature.

use alloc::vec::Vec;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[a, b]`,
/// nodes in increasing order.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre: need at least one node");
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n {
        // Tricomi initial guess for the i-th root, counted from the right.
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        nodes.push(mid - half * x);
        weights.push(half * 2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^b f` with the `n`-point rule; terms summed in node order.
pub fn integrate(n: usize, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(n, a, b);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in [1, 2, 5, 17, 33] {
            for deg in 0..(2 * n) {
                let got = integrate(n, 0.0, 1.0, |x| libm::pow(x, deg as f64));
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((got - exact).abs() < 1e-14, "n={n} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn weights_sum_to_length_and_nodes_sorted() {
        let (x, w) = gauss_legendre(17, 0.25, 1.0);
        assert!((w.iter().sum::<f64>() - 0.75).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(x[0] > 0.25 && x[16] < 1.0);
    }
}
