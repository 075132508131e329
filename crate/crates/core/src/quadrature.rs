//! Gauss–Hermite and Gauss–Legendre rules.
//!
//! Hermite weights are kept in log form: for m = 200 the outer weights sit
//! near 1e-260 and the 2D tensor products would underflow.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};

/// Rule for ∫ f(u) e^{-u²} du over ℝ.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

/// Rule for ∫ f(s) ds over [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Orthonormal Hermite recurrence evaluated at `x` up to degree `m`.
/// Returns (p_m, p_{m-1}, log scale) with the true values p·e^{scale}.
fn hermite_pair(m: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut scale = 0.0;
    for j in 1..=m {
        let jf = j as f64;
        let next = x * (2.0 / jf).sqrt() * cur - ((jf - 1.0) / jf).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            cur *= 1e-150;
            prev *= 1e-150;
            scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (cur, prev, scale)
}

impl GaussHermite {
    /// Golub–Welsch eigenvalues, Newton-polished on the orthonormal recurrence.
    pub fn new(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(invalid("gh_order", "must be at least 1"));
        }
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for i in 1..m {
            let b = (i as f64 / 2.0).sqrt();
            jac[(i, i - 1)] = b;
            jac[(i - 1, i)] = b;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);
        // Exact symmetry before polishing.
        for i in 0..m / 2 {
            let v = 0.5 * (nodes[m - 1 - i] - nodes[i]);
            nodes[i] = -v;
            nodes[m - 1 - i] = v;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        let mf = m as f64;
        let mut log_weights = Vec::with_capacity(m);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (pm, pm1, _) = hermite_pair(m, *x);
                if pm1 == 0.0 {
                    break;
                }
                let step = pm / ((2.0 * mf).sqrt() * pm1);
                *x -= step;
                if step.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, pm1, scale) = hermite_pair(m, *x);
            log_weights.push(-mf.ln() - 2.0 * (pm1.abs().ln() + scale));
        }
        Ok(Self { nodes, log_weights })
    }

    /// Shared cached rule; rules are immutable once built.
    pub fn cached(m: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&m) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(Self::new(m)?);
        cache.lock().expect("rule cache poisoned").insert(m, rule.clone());
        Ok(rule)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Σ w_i f(u_i) for the 1D rule.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.log_weights).map(|(&u, &lw)| lw.exp() * f(u)).sum()
    }
}

impl GaussLegendre {
    pub fn new(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(invalid("order", "must be at least 1"));
        }
        let mf = m as f64;
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=m {
                    let jf = j as f64;
                    let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                    p0 = p1;
                    p1 = p2;
                }
                let pm = if m == 1 { x } else { p1 };
                let pm1 = if m == 1 { 1.0 } else { p0 };
                dp = mf * (x * pm - pm1) / (x * x - 1.0);
                let step = pm / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫_a^b f by this rule mapped affinely.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(&s, &w)| w * f(c + h * s)).sum::<f64>() * h
    }
}
