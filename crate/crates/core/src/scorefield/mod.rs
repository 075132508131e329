//! Heat-flow quantities p̄, ∇q̄, D²q̄, q̄_t, ∇q̄_t in the q̄-clock.
//!
//! Smooth targets use p̄(t̄, x) = π^{-n/2} ∫ e^{-|u|²} h(x - √(2t̄)u) du with
//! h = e^{-g}; compact targets use kernel moments of π₀.

mod accum;
mod compact;
mod smooth;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite_point, check_t_bar, invalid, Error, Result};
use crate::quadrature::{GaussHermite, GaussLegendre};
use crate::targets::{GaussianMixtureSpec, TargetPayload, TargetSpec};

pub(crate) use accum::LogMoments;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Gauss–Hermite nodes for 1D smooth targets.
    pub gh_order_1d: usize,
    /// Gauss–Hermite nodes per axis for 2D smooth targets.
    pub gh_order_2d: usize,
    /// Composite Gauss–Legendre panels (in u) used when g has kinks.
    pub kink_panel_width: f64,
    pub kink_panel_order: usize,
    /// |u| cutoff of the kink-aware rule before the e^{-κu²} rescaling.
    pub kink_cutoff: f64,
    pub compact_fine_spacing_factor: f64,
    pub compact_fine_radius_factor: f64,
    /// Gauss–Legendre order per axis inside each fine panel.
    pub compact_fine_order: usize,
    pub compact_coarse_cells: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            gh_order_1d: 200,
            gh_order_2d: 96,
            kink_panel_width: 0.25,
            kink_panel_order: 16,
            kink_cutoff: 40.0,
            compact_fine_spacing_factor: 0.125,
            compact_fine_radius_factor: 8.0,
            compact_fine_order: 4,
            compact_coarse_cells: 512,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gh_order_1d < 8 || self.gh_order_2d < 8 {
            return Err(invalid("gh_order", "must be ≥ 8"));
        }
        if !(self.compact_fine_spacing_factor > 0.0 && self.compact_fine_spacing_factor <= 0.25) {
            return Err(invalid("compact_fine_spacing_factor", "must lie in (0, 1/4]"));
        }
        if !(self.compact_fine_radius_factor >= 4.0) || !self.compact_fine_radius_factor.is_finite() {
            return Err(invalid("compact_fine_radius_factor", "must be ≥ 4"));
        }
        if self.compact_coarse_cells < 1 || self.compact_fine_order < 1 || self.kink_panel_order < 1 {
            return Err(invalid("compact_coarse_cells", "cell counts and orders must be ≥ 1"));
        }
        if !(self.kink_panel_width > 0.0) || !(self.kink_cutoff >= 8.0) {
            return Err(invalid("kink_panel_width", "needs width > 0 and cutoff ≥ 8"));
        }
        Ok(())
    }
}

/// Heat-flow bundle at (t̄, x).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEval {
    pub t_bar: f64,
    pub x: DVector<f64>,
    /// log p̄ for smooth targets, log p̂ = log ∫ e^{-|x-y|²/2t̄} dπ₀ for compact ones.
    pub log_pbar: f64,
    pub grad_qbar: DVector<f64>,
    pub hess_qbar: DMatrix<f64>,
    pub qbar_t: Option<f64>,
    pub grad_qbar_t: Option<DVector<f64>>,
    /// E_ω[D²g], the upper envelope of D²q̄ (smooth targets only).
    pub upper_a: Option<DMatrix<f64>>,
}

/// Forward-clock view: ∇q, D²q and the score at (t, x).
#[derive(Debug, Clone, PartialEq)]
pub struct QCoords {
    pub t: f64,
    pub x: DVector<f64>,
    pub grad_q: DVector<f64>,
    pub hess_q: DMatrix<f64>,
    pub score: DVector<f64>,
}

/// Maps a q̄-clock evaluation taken at (1 - e^{-t}, e^{-t/2}x) to time t.
pub fn q_coords(eval: &ScoreEval, t: f64) -> Result<QCoords> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::TimeOutOfRange { t, range: "[0, ∞)" });
    }
    let expected = -(-t).exp_m1();
    if (eval.t_bar - expected).abs() > 1e-12 * expected.max(1e-300).max(eval.t_bar) {
        return Err(Error::Contract(format!(
            "evaluation at t̄ = {} does not correspond to t = {t} (t̄ = {expected})",
            eval.t_bar
        )));
    }
    let half = (-0.5 * t).exp();
    let x = &eval.x / half;
    let grad_q = &eval.grad_qbar * half;
    let hess_q = &eval.hess_qbar * (half * half);
    let score = -&grad_q - &x;
    Ok(QCoords { t, x, grad_q, hess_q, score })
}

/// Exact score ∇log p_t and its Jacobian for an evolved mixture.
pub fn closed_form_mixture(spec: &GaussianMixtureSpec, t: f64, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if x.len() != spec.dim() {
        return Err(Error::InvalidInput(format!("point has dimension {}, expected {}", x.len(), spec.dim())));
    }
    Ok(spec.at_time(t)?.score_and_jacobian(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactMoments {
    pub log_phat: f64,
    pub ybar: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Quadrature engine; immutable after construction and shareable across threads.
#[derive(Debug, Clone)]
pub struct ScoreEngine {
    cfg: QuadratureConfig,
    gh_1d: Arc<GaussHermite>,
    gh_2d: Arc<GaussHermite>,
    kink_rule: GaussLegendre,
    fine_rule: GaussLegendre,
}

impl Default for ScoreEngine {
    fn default() -> Self {
        Self::new(QuadratureConfig::default()).expect("default quadrature config is valid")
    }
}

impl ScoreEngine {
    pub fn new(cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            gh_1d: GaussHermite::cached(cfg.gh_order_1d)?,
            gh_2d: GaussHermite::cached(cfg.gh_order_2d)?,
            kink_rule: GaussLegendre::new(cfg.kink_panel_order)?,
            fine_rule: GaussLegendre::new(cfg.compact_fine_order)?,
            cfg,
        })
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    /// Full bundle; `with_time` adds q̄_t and ∇q̄_t (smooth targets only).
    pub fn evaluate(&self, target: &TargetSpec, t_bar: f64, x: &[f64], with_time: bool) -> Result<ScoreEval> {
        check_t_bar(t_bar)?;
        check_finite_point(x)?;
        if x.len() != target.dim() {
            return Err(Error::InvalidInput(format!("point has dimension {}, expected {}", x.len(), target.dim())));
        }
        match target.payload() {
            TargetPayload::CompactMeasure(c) => {
                if with_time {
                    return Err(Error::Unsupported("time derivatives of compact targets".into()));
                }
                let mom = self.compact_moments_of(c, t_bar, x)?;
                let n = x.len();
                let xv = DVector::from_column_slice(x);
                let grad = (&xv - &mom.ybar) / t_bar;
                let hess = DMatrix::identity(n, n) / t_bar - &mom.cov / (t_bar * t_bar);
                Ok(ScoreEval {
                    t_bar,
                    x: xv,
                    log_pbar: mom.log_phat,
                    grad_qbar: grad,
                    hess_qbar: hess,
                    qbar_t: None,
                    grad_qbar_t: None,
                    upper_a: None,
                })
            }
            _ => {
                let spec = target.smooth().expect("non-compact targets carry a potential");
                self.smooth_eval(spec, t_bar, x, with_time)
            }
        }
    }

    pub fn log_pbar(&self, target: &TargetSpec, t_bar: f64, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(target, t_bar, x, false)?.log_pbar)
    }

    pub fn grad_qbar(&self, target: &TargetSpec, t_bar: f64, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.evaluate(target, t_bar, x, false)?.grad_qbar)
    }

    pub fn hess_qbar(&self, target: &TargetSpec, t_bar: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.evaluate(target, t_bar, x, false)?.hess_qbar)
    }

    pub fn qbar_time_derivs(&self, target: &TargetSpec, t_bar: f64, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        if target.compact().is_some() {
            return Err(Error::Unsupported("time derivatives of compact targets".into()));
        }
        let ev = self.evaluate(target, t_bar, x, true)?;
        Ok((ev.qbar_t.expect("requested"), ev.grad_qbar_t.expect("requested")))
    }

    pub fn compact_moments(&self, target: &TargetSpec, t_bar: f64, x: &[f64]) -> Result<CompactMoments> {
        let c = target
            .compact()
            .ok_or_else(|| Error::Unsupported(format!("`{}` is not a compact measure", target.name())))?;
        check_t_bar(t_bar)?;
        check_finite_point(x)?;
        if x.len() != c.dim() {
            return Err(Error::InvalidInput(format!("point has dimension {}, expected {}", x.len(), c.dim())));
        }
        self.compact_moments_of(c, t_bar, x)
    }

    /// Forward-clock evaluation at (t, x); t = 0 reads g directly.
    pub fn evaluate_q(&self, target: &TargetSpec, t: f64, x: &[f64]) -> Result<QCoords> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::TimeOutOfRange { t, range: "[0, ∞)" });
        }
        if t == 0.0 {
            let spec = target
                .smooth()
                .ok_or_else(|| Error::Domain("score of a compact measure is undefined at t = 0".into()))?;
            let (_, grad, hess) = spec.eval(x)?;
            let xv = DVector::from_column_slice(x);
            let score = -&grad - &xv;
            return Ok(QCoords { t, x: xv, grad_q: grad, hess_q: hess, score });
        }
        let half = (-0.5 * t).exp();
        let xb: Vec<f64> = x.iter().map(|v| v * half).collect();
        let ev = self.evaluate(target, -(-t).exp_m1(), &xb, false)?;
        q_coords(&ev, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{catalog, ParamMap};
    use approx::assert_relative_eq;

    fn target(name: &str, kv: &[(&str, f64)]) -> TargetSpec {
        let p: ParamMap = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        catalog(name, &p).unwrap()
    }

    #[test]
    fn std_normal_field_is_trivial() {
        let e = ScoreEngine::default();
        let t = target("std_normal", &[]);
        let ev = e.evaluate(&t, 0.3, &[1.7], true).unwrap();
        assert_relative_eq!(ev.log_pbar, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-13);
        assert!(ev.grad_qbar[0].abs() < 1e-13);
        assert!(ev.hess_qbar[(0, 0)].abs() < 1e-13);
        assert!(ev.qbar_t.unwrap().abs() < 1e-13);
        let q = e.evaluate_q(&t, 0.8, &[1.2]).unwrap();
        assert_relative_eq!(q.score[0], -1.2, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_times() {
        let e = ScoreEngine::default();
        let t = target("std_normal", &[]);
        assert!(e.evaluate(&t, 0.0, &[0.0], false).is_err());
        assert!(e.evaluate(&t, 1.5, &[0.0], false).is_err());
        let c = target("two_point", &[]);
        assert!(matches!(e.qbar_time_derivs(&c, 0.5, &[0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn q_coords_contract() {
        let e = ScoreEngine::default();
        let t = target("gaussian", &[("sigma2", 4.0)]);
        let tt = 3f64.ln();
        let ev = e.evaluate(&t, 1.0 - (-tt).exp(), &[(-0.5 * tt).exp()], false).unwrap();
        let q = q_coords(&ev, tt).unwrap();
        assert_relative_eq!(q.x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(q.score[0], -0.5, epsilon = 1e-10);
        assert!(matches!(q_coords(&ev, 0.5), Err(Error::Contract(_))));
    }

    #[test]
    fn config_validation() {
        let bad = QuadratureConfig { gh_order_1d: 4, ..Default::default() };
        assert!(ScoreEngine::new(bad).is_err());
        let bad = QuadratureConfig { compact_fine_spacing_factor: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadratureConfig { compact_fine_radius_factor: 2.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
