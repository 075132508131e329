use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Isotropic Gaussian mixture Σ wᵢ N(μᵢ, σᵢ² I).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

impl GaussianMixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("weights", "at least one component required"));
        }
        if means.len() != weights.len() || variances.len() != weights.len() {
            return Err(invalid("means", "weights, means and variances must have equal length"));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(invalid("means", "all means must share a dimension ≥ 1"));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("means", "must be finite"));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights", "must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("sum to {total}, expected 1")));
        }
        if variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(invalid("variances", "must be positive and finite"));
        }
        Ok(Self { dim, weights, means, variances })
    }

    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Law of X_t under dX = -½X dt + dW started from this mixture.
    pub fn at_time(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::TimeOutOfRange { t, range: "[0, ∞)" });
        }
        let decay = (-t).exp();
        let shrink = (-0.5 * t).exp();
        let noise = -(-t).exp_m1();
        Ok(Self {
            dim: self.dim,
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| m.iter().map(|v| v * shrink).collect()).collect(),
            variances: self.variances.iter().map(|v| v * decay + noise).collect(),
        })
    }

    fn component_log(&self, i: usize, x: &[f64]) -> f64 {
        let v = self.variances[i];
        let d2: f64 = x.iter().zip(&self.means[i]).map(|(a, b)| (a - b) * (a - b)).sum();
        self.weights[i].ln() - 0.5 * d2 / v - 0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI * v).ln()
    }

    fn max_log(&self, x: &[f64]) -> f64 {
        (0..self.len()).map(|i| self.component_log(i, x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let top = self.max_log(x);
        let s: f64 = (0..self.len()).map(|i| (self.component_log(i, x) - top).exp()).sum();
        top + s.ln()
    }

    /// Score ∇log p written into `out`, allocation-free.
    pub fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let top = self.max_log(x);
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut z = 0.0;
        for i in 0..self.len() {
            let r = (self.component_log(i, x) - top).exp();
            z += r;
            let v = self.variances[i];
            for (o, (xi, mi)) in out.iter_mut().zip(x.iter().zip(&self.means[i])) {
                *o += r * (mi - xi) / v;
            }
        }
        out.iter_mut().for_each(|o| *o /= z);
    }

    /// Score and its Jacobian D²log p.
    pub fn score_and_jacobian(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim;
        let top = self.max_log(x);
        let resp: Vec<f64> = (0..self.len()).map(|i| (self.component_log(i, x) - top).exp()).collect();
        let z: f64 = resp.iter().sum();
        let xv = DVector::from_column_slice(x);
        let mut mean_s = DVector::zeros(n);
        let mut second = DMatrix::zeros(n, n);
        let mut mean_prec = 0.0;
        for (i, r) in resp.iter().enumerate() {
            let r = r / z;
            let v = self.variances[i];
            let s = (DVector::from_column_slice(&self.means[i]) - &xv) / v;
            second += r * &s * s.transpose();
            mean_s += r * &s;
            mean_prec += r / v;
        }
        let cov = second - &mean_s * mean_s.transpose();
        let mut jac = cov - DMatrix::identity(n, n) * mean_prec;
        jac = 0.5 * (&jac + jac.transpose());
        (mean_s, jac)
    }

    /// E|X|² = Σ wᵢ(|μᵢ|² + nσᵢ²).
    pub fn second_moment(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, m), v)| w * (m.iter().map(|a| a * a).sum::<f64>() + self.dim as f64 * v))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn at_time_examples() {
        let g = GaussianMixtureSpec::gaussian(vec![2.0], 1.0).unwrap();
        let e = g.at_time(2.0 * 2f64.ln()).unwrap();
        assert_relative_eq!(e.means()[0][0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.variances()[0], 1.0, epsilon = 1e-15);
        let g = GaussianMixtureSpec::gaussian(vec![0.0], 4.0).unwrap();
        assert_relative_eq!(g.at_time(3f64.ln()).unwrap().variances()[0], 2.0, epsilon = 1e-14);
        assert!(g.at_time(-0.1).is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(GaussianMixtureSpec::new(vec![0.5, 0.4], vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).is_err());
        assert!(GaussianMixtureSpec::new(vec![1.0], vec![vec![0.0]], vec![0.0]).is_err());
    }

    #[test]
    fn score_of_evolved_gaussian() {
        let g = GaussianMixtureSpec::gaussian(vec![0.0], 4.0).unwrap().at_time(3f64.ln()).unwrap();
        let (s, j) = g.score_and_jacobian(&[1.3]);
        assert_relative_eq!(s[0], -0.65, epsilon = 1e-14);
        assert_relative_eq!(j[(0, 0)], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_mixture_score_vanishes_at_origin() {
        let m = GaussianMixtureSpec::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![0.25, 0.25]).unwrap();
        let (s, _) = m.score_and_jacobian(&[0.0]);
        assert_eq!(s[0], 0.0);
        assert_relative_eq!(m.second_moment(), 1.25, epsilon = 1e-15);
    }
}
