//! Gauss-Hermite and Gauss-Legendre rules, computed by Newton iteration on the
//! orthogonal-polynomial recurrences and cached per node count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::scalar::Real;

/// Default node count for Gaussian expectations.
pub const HERMITE_NODES: usize = 64;
/// Default node count for truncated-Gaussian and Student-t expectations.
pub const LEGENDRE_NODES: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    Hermite,
    Legendre,
}

fn cache() -> &'static Mutex<HashMap<(Kind, usize), Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<(Kind, usize), Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(kind: Kind, n: usize, build: fn(usize) -> Rule) -> Arc<Rule> {
    let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
    map.entry((kind, n)).or_insert_with(|| Arc::new(build(n))).clone()
}

/// Gauss-Hermite rule for `∫ e^{-x^2} f(x) dx`.
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    cached(Kind::Hermite, n, build_hermite)
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    cached(Kind::Legendre, n, build_legendre)
}

fn build_hermite(n: usize) -> Rule {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^{-1/4}
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule { nodes: x, weights: w }
}

fn build_legendre(n: usize) -> Rule {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule { nodes: x, weights: w }
}

/// Nodes and weights mapped to `[a, b]`, converted to the working scalar.
pub fn legendre_on<T: Real>(n: usize, a: T, b: T) -> impl Iterator<Item = (T, T)> {
    let rule = gauss_legendre(n);
    let half = (b - a) * T::half();
    let mid = (a + b) * T::half();
    (0..n).map(move |i| (mid + half * T::c(rule.nodes[i]), half * T::c(rule.weights[i])))
}
