//! Gauss–Legendre quadrature with panel-doubling error control.

use num::complex::Complex64;
use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Nodes are found by Newton iteration from the Chebyshev initial guess;
/// accuracy is close to machine precision for the orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integral of `f` over `[a, b]` by a composite `order`-point rule with
/// `panels` equal panels.
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut partials = Vec::with_capacity(panels);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut vals = Vec::with_capacity(order);
        for (x, w) in nodes.iter().zip(&weights) {
            vals.push(w * f(mid + 0.5 * h * x));
        }
        partials.push(0.5 * h * crate::summation::pairwise_sum(&vals));
    }
    crate::summation::pairwise_sum(&partials)
}

/// Adaptive integral of `f` over `[a, b]`: panel count doubles until two
/// successive composite rules agree to `tol` (absolute).
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut panels = 4;
    let mut prev = integrate_panels(&mut f, a, b, panels, 16);
    loop {
        panels *= 2;
        let cur = integrate_panels(&mut f, a, b, panels, 16);
        if (cur - prev).abs() <= tol || panels >= 1 << 16 {
            return cur;
        }
        prev = cur;
    }
}

/// Complex-valued variant of [`integrate_adaptive`].
pub fn integrate_adaptive_complex<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Complex64 {
    let mut panels = 4;
    let run = |panels: usize, f: &mut F| {
        let (nodes, weights) = gauss_legendre(16);
        let h = (b - a) / panels as f64;
        let mut partials = Vec::with_capacity(panels);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let mut vals = Vec::with_capacity(16);
            for (x, w) in nodes.iter().zip(&weights) {
                vals.push(f(mid + 0.5 * h * x) * *w);
            }
            partials.push(crate::summation::pairwise_sum_complex(&vals) * (0.5 * h));
        }
        crate::summation::pairwise_sum_complex(&partials)
    };
    let mut prev = run(panels, &mut f);
    loop {
        panels *= 2;
        let cur = run(panels, &mut f);
        if (cur - prev).norm() <= tol || panels >= 1 << 16 {
            return cur;
        }
        prev = cur;
    }
}

/// Adaptive tensor-product integral of `f(x, y)` over a rectangle.
///
/// The outer variable is integrated adaptively; each outer evaluation
/// integrates the inner variable adaptively to a tighter tolerance.
pub fn integrate_2d_adaptive<F: Fn(f64, f64) -> f64>(
    f: F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    tol: f64,
) -> f64 {
    let inner_tol = tol / (10.0 * (x1 - x0).abs().max(1.0));
    integrate_adaptive(
        |x| integrate_adaptive(|y| f(x, y), y0, y1, inner_tol),
        x0,
        x1,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        // 16-point Gauss is exact to degree 31.
        let v = integrate_panels(|x| x.powi(8), 0.0, 1.0, 1, 16);
        assert!((v - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_sine() {
        let v = integrate_adaptive(|x| x.sin(), 0.0, PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
    }

    #[test]
    fn tensor_product() {
        let v = integrate_2d_adaptive(|x, y| x * y, 0.0, 1.0, 0.0, 2.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-9);
    }
}
