//! Fixed Gauss-Legendre rule used for compensator integrals over continuous
//! mark distributions.

use std::sync::OnceLock;

/// Number of nodes in the continuous-mark quadrature rule.
pub const GAUSS_NODES: usize = 64;

static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();

/// Nodes and weights of the `GAUSS_NODES`-point rule on [-1, 1].
pub fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    RULE.get_or_init(|| legendre_rule(GAUSS_NODES))
}

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            deriv = dp;
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                let (_, dp) = legendre_with_derivative(n, x);
                deriv = dp;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrate `h` over `[lo, hi]`.
pub fn integrate(lo: f64, hi: f64, h: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * h(mid + half * x);
    }
    acc * half
}
