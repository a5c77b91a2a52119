//! Special functions and quadrature used across the crate.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton
/// iteration on the Legendre polynomial recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

fn gl_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gl16();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Adaptive Gauss-Legendre quadrature: an interval is accepted once the
/// 16-point rule agrees with the sum over its two halves.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = gl_fixed(f, a, m);
        let right = gl_fixed(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= tol {
            left + right
        } else {
            rec(f, a, m, left, 0.5 * tol, depth - 1) + rec(f, m, b, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let whole = gl_fixed(&f, a, b);
    rec(&f, a, b, whole, tol, 30)
}

/// t / (e^t - 1), continuous at t = 0.
fn bose(t: f64) -> f64 {
    if t.abs() < 1e-10 {
        1.0 - 0.5 * t
    } else {
        t / t.exp_m1()
    }
}

/// First-order Debye function D1(x) = (1/x) * int_0^x t / (e^t - 1) dt.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        // D1(-x) = D1(x) + x/2
        return debye1(-x) + 0.5 * (-x);
    }
    integrate_adaptive(bose, 0.0, x, 1e-14) / x
}

/// Composite Gauss-Legendre rule on [0, 1] with panels graded geometrically
/// towards both endpoints, for integrands with corner singularities.
pub fn graded_unit_rule(nodes_per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    const LEFT: [f64; 10] = [0.0, 1e-9, 1e-7, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.15, 0.3];
    let mut breaks: Vec<f64> = LEFT.to_vec();
    breaks.push(0.5);
    breaks.extend(LEFT.iter().rev().map(|x| 1.0 - x));
    let (x, w) = gauss_legendre(nodes_per_panel);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(a + half * (xi + 1.0));
            weights.push(wi * half);
        }
    }
    (nodes, weights)
}

/// ln(e^a + e^b) without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
