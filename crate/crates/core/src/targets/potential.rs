use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mixture::GaussianMixtureSpec;
use crate::error::{invalid, Error, Result};

/// g(x) = -log p₀(x) - |x|²/2 with first and second derivatives.
///
/// `hess` is row-major n×n. Implementations must be pure.
pub trait Potential: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn eval_into(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64;

    /// Sorted 1D points where D²g jumps. Quadrature splits there.
    fn kinks(&self) -> &[f64] {
        &[]
    }
}

/// Regularity constants consumed by the bound formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialMetadata {
    /// D²g ⪰ -m0 I.
    pub m0: f64,
    /// D²g ⪯ m1 I.
    pub m1: f64,
    /// ‖D²g‖₂ ≤ l.
    pub l: f64,
    /// g(x) - g(0) ≥ -(α₂/2)|x|² - α₁.
    pub alpha1: f64,
    pub alpha2: f64,
    /// |∇g(x)| ≤ β₁|x| + β₂.
    pub beta1: f64,
    pub beta2: f64,
    pub x0: Vec<f64>,
    /// Global sup |∇g| when finite.
    pub grad_sup: Option<f64>,
}

impl PotentialMetadata {
    pub fn validate(&self, dim: usize) -> Result<()> {
        for (name, v) in [
            ("m0", self.m0),
            ("m1", self.m1),
            ("l", self.l),
            ("alpha1", self.alpha1),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        if !(self.alpha2 >= 0.0 && self.alpha2 < 1.0) {
            return Err(invalid("alpha2", format!("must lie in [0, 1), got {}", self.alpha2)));
        }
        if self.beta1 == 0.0 && self.beta2 > 0.0 {
            return Err(invalid("beta1", "β₂²/β₁ is undefined for β₁ = 0 < β₂"));
        }
        if self.x0.len() != dim {
            return Err(invalid("x0", format!("expected dimension {dim}")));
        }
        if let Some(s) = self.grad_sup {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(invalid("grad_sup", "must be finite and ≥ 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SmoothPotentialSpec {
    potential: Arc<dyn Potential>,
    metadata: PotentialMetadata,
    law: Option<GaussianMixtureSpec>,
}

impl SmoothPotentialSpec {
    pub fn new(potential: Arc<dyn Potential>, metadata: PotentialMetadata) -> Result<Self> {
        if potential.dim() == 0 {
            return Err(invalid("dim", "must be ≥ 1"));
        }
        metadata.validate(potential.dim())?;
        Ok(Self { potential, metadata, law: None })
    }

    /// Attach the closed-form law p₀ when the potential came from a mixture.
    pub fn with_law(mut self, law: GaussianMixtureSpec) -> Result<Self> {
        if law.dim() != self.dim() {
            return Err(invalid("law", "dimension mismatch"));
        }
        self.law = Some(law);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }
    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }
    pub fn metadata(&self) -> &PotentialMetadata {
        &self.metadata
    }
    pub fn law(&self) -> Option<&GaussianMixtureSpec> {
        self.law.as_ref()
    }
    pub fn kinks(&self) -> &[f64] {
        self.potential.kinks()
    }

    /// Replace the declared metadata (used to probe the validator).
    pub fn with_metadata(mut self, metadata: PotentialMetadata) -> Result<Self> {
        metadata.validate(self.dim())?;
        self.metadata = metadata;
        Ok(self)
    }

    /// (g, ∇g, D²g) at `x`; non-finite output is a domain error.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::InvalidInput(format!("point has dimension {}, expected {n}", x.len())));
        }
        crate::error::check_finite_point(x)?;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let g = self.potential.eval_into(x, &mut grad, &mut hess);
        if !g.is_finite() || grad.iter().chain(&hess).any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("potential evaluation overflowed at x = {x:?}")));
        }
        Ok((g, DVector::from_vec(grad), DMatrix::from_row_slice(n, n, &hess)))
    }
}

/// g ≡ c.
#[derive(Debug, Clone)]
pub struct ConstantPotential {
    pub dim: usize,
    pub value: f64,
}

impl Potential for ConstantPotential {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, _x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        grad.fill(0.0);
        hess.fill(0.0);
        self.value
    }
}

/// g = a·cos(bx) in one dimension.
#[derive(Debug, Clone)]
pub struct CosinePotential {
    pub a: f64,
    pub b: f64,
}

impl Potential for CosinePotential {
    fn dim(&self) -> usize {
        1
    }
    fn eval_into(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let (s, c) = (self.b * x[0]).sin_cos();
        grad[0] = -self.a * self.b * s;
        hess[0] = -self.a * self.b * self.b * c;
        self.a * c
    }
}

/// g of a Gaussian mixture: -log p₀ - |x|²/2.
#[derive(Debug, Clone)]
pub struct MixturePotential {
    mixture: GaussianMixtureSpec,
}

impl MixturePotential {
    pub fn new(mixture: GaussianMixtureSpec) -> Self {
        Self { mixture }
    }
}

impl Potential for MixturePotential {
    fn dim(&self) -> usize {
        self.mixture.dim()
    }
    fn eval_into(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let n = x.len();
        let (s, j) = self.mixture.score_and_jacobian(x);
        for i in 0..n {
            grad[i] = -s[i] - x[i];
            for k in 0..n {
                hess[i * n + k] = -j[(i, k)] - if i == k { 1.0 } else { 0.0 };
            }
        }
        -self.mixture.log_density(x) - 0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Rigorous regularity constants for an isotropic mixture.
///
/// Equal variances give the sharp two-point covariance bound; unequal
/// variances fall back to a lattice scan for m0.
pub fn mixture_metadata(mix: &GaussianMixtureSpec) -> PotentialMetadata {
    let n = mix.dim() as f64;
    let prec: Vec<f64> = mix.variances().iter().map(|v| 1.0 / v).collect();
    let p_max = prec.iter().copied().fold(f64::MIN, f64::max);
    let p_min = prec.iter().copied().fold(f64::MAX, f64::min);
    let m1 = (p_max - 1.0).max(0.0);
    let equal = prec.iter().all(|p| (p - prec[0]).abs() <= 1e-14 * prec[0]);
    let m0 = if equal {
        let mut diam2: f64 = 0.0;
        for a in mix.means() {
            for b in mix.means() {
                diam2 = diam2.max(a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum());
            }
        }
        (1.0 - prec[0] + diam2 * prec[0] * prec[0] / 4.0).max(0.0)
    } else {
        scan_m0(mix)
    };
    let l = m0.max(m1);
    let beta1_raw = prec.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
    let beta2 = mix
        .means()
        .iter()
        .zip(&prec)
        .map(|(m, p)| p * m.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let beta1 = if beta1_raw == 0.0 && beta2 > 0.0 { 1e-3 } else { beta1_raw };
    let grad_sup = if beta1_raw == 0.0 { Some(beta2) } else { None };

    // Tail constants from p₀ ≤ max_i N(μᵢ, σᵢ²) pointwise.
    let base = (1.0 - p_min).max(0.0);
    let feasible = |alpha2: f64| {
        let b = 0.5 * (1.0 - alpha2);
        mix.means().iter().zip(&prec).all(|(m, p)| {
            let a = 0.5 * p;
            a > b || (a == b && m.iter().all(|v| *v == 0.0))
        })
    };
    let alpha2 = if feasible(base) { base } else { base + 0.5 * (1.0 - base) };
    let b = 0.5 * (1.0 - alpha2);
    let zero = vec![0.0; mix.dim()];
    let log_p0 = mix.log_density(&zero);
    let lower = mix
        .means()
        .iter()
        .zip(&prec)
        .map(|(m, p)| {
            let a = 0.5 * p;
            let mu2: f64 = m.iter().map(|v| v * v).sum();
            let quad = if a > b { -(a * b / (a - b)) * mu2 } else { 0.0 };
            quad + 0.5 * n * (2.0 * std::f64::consts::PI / p).ln()
        })
        .fold(f64::INFINITY, f64::min);
    let alpha1 = (-log_p0 - lower).max(0.0);
    PotentialMetadata { m0, m1, l, alpha1, alpha2, beta1, beta2, x0: zero, grad_sup }
}

fn scan_m0(mix: &GaussianMixtureSpec) -> f64 {
    let pot = MixturePotential::new(mix.clone());
    let n = mix.dim();
    let reach = mix
        .means()
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        + 8.0 * mix.variances().iter().fold(0.0f64, |a, v| a.max(v.sqrt()));
    let per_axis = if n == 1 { 4001 } else { 201 };
    let mut worst = 0.0f64;
    let mut idx = vec![0usize; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    loop {
        let x: Vec<f64> = idx
            .iter()
            .map(|&i| -reach + 2.0 * reach * i as f64 / (per_axis - 1) as f64)
            .collect();
        pot.eval_into(&x, &mut grad, &mut hess);
        let h = DMatrix::from_row_slice(n, n, &hess);
        let lo = h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(-lo);
        let mut k = 0;
        loop {
            if k == n {
                return worst * (1.0 + 1e-6);
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cosine_derivatives() {
        let p = CosinePotential { a: 2.0, b: 1.0 };
        let mut g = [0.0];
        let mut h = [0.0];
        assert_relative_eq!(p.eval_into(&[0.0], &mut g, &mut h), 2.0);
        assert_eq!(h[0], -2.0);
    }

    #[test]
    fn mixture_metadata_two_bumps() {
        let mix = GaussianMixtureSpec::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![0.25, 0.25]).unwrap();
        let md = mixture_metadata(&mix);
        assert_relative_eq!(md.m1, 3.0, epsilon = 1e-14);
        assert_relative_eq!(md.m0, 13.0, epsilon = 1e-14);
        assert_relative_eq!(md.beta2, 4.0, epsilon = 1e-14);
        assert_eq!(md.alpha2, 0.0);
        assert!(md.alpha1 >= 0.0);
    }

    #[test]
    fn metadata_rejects_undefined_constant() {
        let md = PotentialMetadata {
            m0: 0.0,
            m1: 0.0,
            l: 0.0,
            alpha1: 0.0,
            alpha2: 0.0,
            beta1: 0.0,
            beta2: 1.0,
            x0: vec![0.0],
            grad_sup: None,
        };
        assert!(md.validate(1).is_err());
        let md = PotentialMetadata { beta2: 0.0, alpha2: 1.0, ..md };
        assert!(md.validate(1).is_err());
    }
}
