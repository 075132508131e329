//! Closed-form Hessian, gradient and time-derivative bounds, and sweeps that
//! compare them with the quadrature field.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::SweepGrid;
use crate::report::fmt_float;
use crate::scorefield::ScoreEngine;
use crate::targets::{PotentialMetadata, SmoothPotentialSpec, TargetSpec};

pub const DEFAULT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    /// D²q ⪯ e^{-t}M₁, D²q ⪰ -M₀/(e^t - M₀(e^t - 1)) before the horizon.
    FiniteTimeHessian,
    /// ‖D²log p(t)‖ ≤ C_t.
    ShortTimeUniform,
    /// Pointwise gradient, Hessian and ∇q̄_t growth bounds on t̄ ∈ (0, 1].
    LocalGrowth,
    /// |∇q̄| ≤ L₁, -(L₂ + L₁²) ⪯ D²q ⪯ L₂ for bounded ∇g.
    BoundedGradient,
    /// |∇q̄| ≤ (|x| + M)/t, ‖D²q̄‖ ≤ 1/t + M²/t² for compact support.
    CompactSupport,
    /// (log p̄)_xx(1/2, x_k) > k²/3 along a block chain.
    ChainLowerBound,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::FiniteTimeHessian,
        TheoremId::ShortTimeUniform,
        TheoremId::LocalGrowth,
        TheoremId::BoundedGradient,
        TheoremId::CompactSupport,
        TheoremId::ChainLowerBound,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::FiniteTimeHessian => "finite-time-hessian",
            TheoremId::ShortTimeUniform => "short-time-uniform",
            TheoremId::LocalGrowth => "local-growth",
            TheoremId::BoundedGradient => "bounded-gradient",
            TheoremId::CompactSupport => "compact-support",
            TheoremId::ChainLowerBound => "chain-lower-bound",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| invalid("theorem_id", format!("unknown theorem `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteTimeBounds {
    pub upper: f64,
    /// -∞ at or beyond the horizon.
    pub lower: f64,
    /// +∞ when M₀ ≤ 1.
    pub horizon: f64,
}

pub fn finite_time_horizon(m0: f64) -> f64 {
    if m0 > 1.0 {
        -(-1.0 / m0).ln_1p()
    } else {
        f64::INFINITY
    }
}

/// Bounds on D²q at forward time t.
pub fn finite_time_bounds(m0: f64, m1: f64, t: f64) -> FiniteTimeBounds {
    let horizon = finite_time_horizon(m0);
    let et = t.exp();
    let lower = if t < horizon { -m0 / (et - m0 * t.exp_m1()) } else { f64::NEG_INFINITY };
    FiniteTimeBounds { upper: (-t).exp() * m1, lower, horizon }
}

/// Same bounds parametrized by t̄ = 1 - e^{-t}; still in the q clock.
pub fn finite_time_bounds_tbar(m0: f64, m1: f64, t_bar: f64) -> FiniteTimeBounds {
    let decay = 1.0 - t_bar;
    let lower = if m0 * t_bar < 1.0 { -m0 * decay / (1.0 - m0 * t_bar) } else { f64::NEG_INFINITY };
    FiniteTimeBounds { upper: decay * m1, lower, horizon: finite_time_horizon(m0) }
}

/// Time up to which C_t is finite: the stated horizon or the earlier pole
/// of the first branch, whichever comes first.
pub fn short_time_horizon(l0: f64) -> f64 {
    if l0 <= 0.0 {
        return f64::INFINITY;
    }
    let k = l0 + 1.0;
    let stated = -(-1.0 / k).ln_1p();
    let pole = (1.0 / k).ln_1p();
    stated.min(pole)
}

/// C_t with -L₁ ⪯ D²log p₀ ⪯ L₀.
pub fn short_time_ct(l0: f64, l1: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::TimeOutOfRange { t, range: "[0, ∞)" });
    }
    let decay = (-t).exp();
    if l0 <= 0.0 {
        return Ok(decay * l1 + 1.0 - decay);
    }
    let horizon = short_time_horizon(l0);
    if t >= horizon {
        return Err(Error::HorizonExceeded { t, horizon });
    }
    let k = l0 + 1.0;
    Ok((k / (1.0 - k * t.exp_m1()) - 1.0).max(decay * (l1 - 1.0) + 1.0))
}

/// max_{s ∈ [0, T]} C_s, used as the H_T proxy.
pub fn ht_proxy(l0: f64, l1: f64, t_end: f64) -> Result<f64> {
    let steps = 1000;
    (0..=steps).map(|i| short_time_ct(l0, l1, t_end * i as f64 / steps as f64)).try_fold(f64::MIN, |m, c| Ok(m.max(c?)))
}

/// Largest t with e^{t/2} - e^{-t/2} ≤ 1/(2L).
pub fn prior_horizon(l: f64) -> f64 {
    if !(l > 0.0) {
        return f64::NAN;
    }
    2.0 * (1.0 / (4.0 * l)).asinh()
}

/// Inputs of the local growth bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalGrowthParams {
    pub n: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub l: f64,
}

impl LocalGrowthParams {
    pub fn from_metadata(md: &PotentialMetadata, n: usize) -> Self {
        Self { n, alpha1: md.alpha1, alpha2: md.alpha2, beta1: md.beta1, beta2: md.beta2, l: md.l }
    }

    fn check(&self) -> Result<()> {
        if !(self.alpha2 >= 0.0 && self.alpha2 < 1.0) {
            return Err(invalid("alpha2", "must lie in [0, 1)"));
        }
        Ok(())
    }

    fn log_core(&self, b: f64) -> f64 {
        let n = self.n as f64;
        (n + 3.0) * (2.0 * (1.0 + 4.0 * b) / (1.0 - self.alpha2).sqrt()).ln() + 4.0 * n * n.ln() + self.alpha1 + 1.0
    }

    /// C_n; the β₂²/β₁ term is taken as 0 when β₁ = β₂ = 0.
    pub fn c_n(&self) -> f64 {
        let ratio = if self.beta2 == 0.0 { 0.0 } else { self.beta2 * self.beta2 / self.beta1 };
        2.0 * (self.log_core(self.beta1) + ratio).sqrt()
    }

    pub fn c_beta(&self) -> f64 {
        3.0 * self.beta1.sqrt() + 1.0 + 6.0 * self.alpha2 / (1.0 - self.alpha2).sqrt()
    }

    pub fn c_n_tilde(&self) -> f64 {
        2.0 * self.log_core(self.l).sqrt()
    }

    pub fn c_l(&self) -> f64 {
        3.0 * self.l.sqrt() + 1.0 + 6.0 * self.alpha2 / (1.0 - self.alpha2).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalGrowthBounds {
    pub grad: f64,
    pub hess: f64,
    pub time: f64,
}

fn norm1(v: f64) -> f64 {
    v.max(1.0)
}

/// Bounds on |∇q̄|, ‖D²q̄‖ and |∇q̄_t| at (t̄, x).
///
/// `x_minus_x0` is x - x₀; `shifted` is x - x₀ - ∇g(x₀).
pub fn local_growth_bounds(p: &LocalGrowthParams, t_bar: f64, x_minus_x0: f64, shifted: f64) -> Result<LocalGrowthBounds> {
    p.check()?;
    crate::error::check_t_bar(t_bar)?;
    let s = (1.0 - p.alpha2).sqrt();
    let grad = if p.beta1 == 0.0 {
        p.beta2
    } else {
        3.0 * p.beta1 / s * p.c_n().max(p.c_beta() * norm1(x_minus_x0)) + p.beta2
    };
    let ct = p.c_n_tilde();
    let cl = p.c_l() * norm1(shifted);
    let l = p.l;
    let hess = (10.0 * l * l + l) / (1.0 - p.alpha2) * (ct * ct).max(cl * cl);
    let time = (48.0 * l * l + 2.0 * l) / (t_bar.sqrt() * s.powi(3)) * ct.powi(3).max(cl.powi(3));
    Ok(LocalGrowthBounds { grad, hess, time })
}

/// Local growth bounds for a potential at (t̄, x), reading x₀ and ∇g(x₀)
/// from its metadata.
pub fn local_growth_bounds_at(spec: &SmoothPotentialSpec, t_bar: f64, x: &[f64]) -> Result<LocalGrowthBounds> {
    let md = spec.metadata();
    if x.len() != spec.dim() {
        return Err(Error::InvalidInput(format!("point has dimension {}, expected {}", x.len(), spec.dim())));
    }
    let grad0 = spec.eval(&md.x0)?.1;
    let (d, sh) = growth_distances(x, &md.x0, grad0.as_slice());
    local_growth_bounds(&LocalGrowthParams::from_metadata(md, spec.dim()), t_bar, d, sh)
}

/// (|x - x₀|, |x - x₀ - ∇g(x₀)|).
fn growth_distances(x: &[f64], x0: &[f64], grad0: &[f64]) -> (f64, f64) {
    let d = x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let sh = x.iter().zip(x0).zip(grad0).map(|((a, b), g)| (a - b - g).powi(2)).sum::<f64>().sqrt();
    (d, sh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundedGradientBounds {
    pub grad: f64,
    pub hess_lower: f64,
    pub hess_upper: f64,
}

pub fn bounded_gradient_bounds(l1: f64, l2: f64) -> BoundedGradientBounds {
    BoundedGradientBounds { grad: l1, hess_lower: -(l2 + l1 * l1), hess_upper: l2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompactBounds {
    pub grad: f64,
    pub hess: f64,
}

pub fn compact_bounds(m: f64, t_bar: f64, x_norm: f64) -> CompactBounds {
    CompactBounds { grad: (x_norm + m) / t_bar, hess: 1.0 / t_bar + m * m / (t_bar * t_bar) }
}

/// Lipschitz constant after early stopping at δ: 1 + 1/δ + M²/δ².
pub fn early_stopping_lipschitz(m: f64, delta: f64) -> f64 {
    1.0 + 1.0 / delta + m * m / (delta * delta)
}

/// (M₂ + n)e^{-T} + Tε₀² + nT²L²/N.
pub fn kl_predicted(m2: f64, n: usize, t_end: f64, eps0: f64, steps: usize, lipschitz: f64) -> f64 {
    let n = n as f64;
    (m2 + n) * (-t_end).exp() + t_end * eps0 * eps0 + n * t_end * t_end * lipschitz * lipschitz / steps as f64
}

/// Discretization term of the general bound with unit constant: L⁶Tn(n log n)²/N.
pub fn kl_discretization_general(n: usize, t_end: f64, steps: usize, lipschitz: f64) -> f64 {
    let nf = n as f64;
    lipschitz.powi(6) * t_end * nf * (nf * nf.ln()).powi(2) / steps as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub quantity: String,
    pub bound: f64,
    pub observed: f64,
    /// ≥ 0 means satisfied.
    pub margin: f64,
    pub violated: bool,
}

impl BoundRow {
    pub fn new(t: f64, x: Vec<f64>, quantity: &str, bound: f64, observed: f64, margin: f64, tol: f64) -> Self {
        Self { t, x, quantity: quantity.to_string(), bound, observed, margin, violated: !(margin >= -tol) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub quantity: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: TheoremId,
    pub tolerance: f64,
    pub rows: Vec<BoundRow>,
    /// Points outside the theorem's time domain; flagged, never evaluated.
    pub skipped: Vec<SkippedPoint>,
}

impl BoundReport {
    pub fn from_rows(theorem: TheoremId, tolerance: f64, rows: Vec<BoundRow>, skipped: Vec<SkippedPoint>) -> Result<Self> {
        if rows.is_empty() && skipped.is_empty() {
            return Err(Error::InvalidInput("bound report needs a nonempty grid".into()));
        }
        Ok(Self { theorem, tolerance, rows, skipped })
    }

    pub fn violations(&self) -> Vec<&BoundRow> {
        self.rows.iter().filter(|r| r.violated).collect()
    }

    pub fn violations_of(&self, quantity: &str) -> usize {
        self.rows.iter().filter(|r| r.violated && r.quantity == quantity).count()
    }

    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.rows.first().map(|r| r.x.len()).unwrap_or(0);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend(["quantity", "bound", "observed", "margin", "violated"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![fmt_float(r.t)];
            rec.extend(r.x.iter().map(|v| fmt_float(*v)));
            rec.push(r.quantity.clone());
            rec.extend([r.bound, r.observed, r.margin].map(fmt_float));
            rec.push(r.violated.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn extremes(h: &DMatrix<f64>) -> (f64, f64) {
    let eig = h.symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn spectral(h: &DMatrix<f64>) -> f64 {
    let (lo, hi) = extremes(h);
    lo.abs().max(hi.abs())
}

enum Outcome {
    Row(BoundRow),
    Skip(SkippedPoint),
}

/// Sweeps `theorem` over `grid` (times in the q̄ clock).
pub fn sweep_verify(
    target: &TargetSpec,
    theorem: TheoremId,
    grid: &SweepGrid,
    engine: &ScoreEngine,
    tolerance: f64,
) -> Result<BoundReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    let inapplicable = || Error::Inapplicable { theorem: theorem.to_string(), target: target.name().to_string() };
    let smooth = target.smooth();
    match theorem {
        TheoremId::CompactSupport if target.compact().is_none() => return Err(inapplicable()),
        TheoremId::ChainLowerBound => return Err(inapplicable()),
        TheoremId::BoundedGradient if smooth.and_then(|s| s.metadata().grad_sup).is_none() => {
            return Err(inapplicable())
        }
        TheoremId::FiniteTimeHessian | TheoremId::ShortTimeUniform | TheoremId::LocalGrowth if smooth.is_none() => {
            return Err(inapplicable())
        }
        _ => {}
    }
    let n = target.dim();
    let growth_shift = match (theorem, smooth) {
        (TheoremId::LocalGrowth, Some(s)) => {
            let md = s.metadata();
            Some((LocalGrowthParams::from_metadata(md, n), md.x0.clone(), s.eval(&md.x0)?.1))
        }
        _ => None,
    };
    let outcomes: Vec<Vec<Outcome>> = grid
        .points
        .par_iter()
        .map(|(t_bar, x)| -> Result<Vec<Outcome>> {
            let t_bar = *t_bar;
            if x.len() != n {
                return Err(Error::InvalidInput(format!("grid point {x:?} has wrong dimension")));
            }
            let row = |q: &str, bound: f64, observed: f64, margin: f64| {
                Outcome::Row(BoundRow::new(t_bar, x.clone(), q, bound, observed, margin, tolerance))
            };
            let skip = |q: &str, reason: String| {
                Outcome::Skip(SkippedPoint { t: t_bar, x: x.clone(), quantity: q.to_string(), reason })
            };
            let mut out = Vec::new();
            match theorem {
                TheoremId::FiniteTimeHessian => {
                    let md = smooth.expect("checked").metadata();
                    let b = finite_time_bounds_tbar(md.m0, md.m1, t_bar);
                    let ev = engine.evaluate(target, t_bar, x, false)?;
                    let (lo, hi) = extremes(&(&ev.hess_qbar * (1.0 - t_bar)));
                    out.push(row("hess_q_max", b.upper, hi, b.upper - hi));
                    if b.lower.is_finite() {
                        out.push(row("hess_q_min", b.lower, lo, lo - b.lower));
                    } else {
                        out.push(skip("hess_q_min", format!("t̄ = {t_bar} is at or beyond the horizon 1/M0")));
                    }
                }
                TheoremId::ShortTimeUniform => {
                    let md = smooth.expect("checked").metadata();
                    let t = -(-t_bar).ln_1p();
                    match short_time_ct(md.m0 - 1.0, md.m1 + 1.0, t) {
                        Ok(ct) => {
                            let ev = engine.evaluate(target, t_bar, x, false)?;
                            let hess_log_p = -(&ev.hess_qbar * (1.0 - t_bar) + DMatrix::identity(n, n));
                            let obs = spectral(&hess_log_p);
                            out.push(row("hess_log_p_norm", ct, obs, ct - obs));
                        }
                        Err(Error::HorizonExceeded { horizon, .. }) => {
                            out.push(skip("hess_log_p_norm", format!("t = {t} is beyond {horizon}")));
                        }
                        Err(e) => return Err(e),
                    }
                }
                TheoremId::LocalGrowth => {
                    let (params, x0, grad0) = growth_shift.as_ref().expect("computed above");
                    let (d, sh) = growth_distances(x, x0, grad0.as_slice());
                    let b = local_growth_bounds(params, t_bar, d, sh)?;
                    let ev = engine.evaluate(target, t_bar, x, true)?;
                    let g = ev.grad_qbar.norm();
                    let h = spectral(&ev.hess_qbar);
                    let gt = ev.grad_qbar_t.as_ref().expect("requested").norm();
                    out.push(row("grad_qbar_norm", b.grad, g, b.grad - g));
                    out.push(row("hess_qbar_norm", b.hess, h, b.hess - h));
                    out.push(row("grad_qbar_t_norm", b.time, gt, b.time - gt));
                }
                TheoremId::BoundedGradient => {
                    let md = smooth.expect("checked").metadata();
                    let b = bounded_gradient_bounds(md.grad_sup.expect("checked"), md.l);
                    let ev = engine.evaluate(target, t_bar, x, false)?;
                    let g = ev.grad_qbar.norm();
                    let (lo, hi) = extremes(&(&ev.hess_qbar * (1.0 - t_bar)));
                    out.push(row("grad_qbar_norm", b.grad, g, b.grad - g));
                    out.push(row("hess_q_max", b.hess_upper, hi, b.hess_upper - hi));
                    out.push(row("hess_q_min", b.hess_lower, lo, lo - b.hess_lower));
                }
                TheoremId::CompactSupport => {
                    let m = target.compact().expect("checked").radius();
                    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let b = compact_bounds(m, t_bar, xn);
                    let ev = engine.evaluate(target, t_bar, x, false)?;
                    let g = ev.grad_qbar.norm();
                    let h = spectral(&ev.hess_qbar);
                    out.push(row("grad_qbar_norm", b.grad, g, b.grad - g));
                    out.push(row("hess_qbar_norm", b.hess, h, b.hess - h));
                }
                TheoremId::ChainLowerBound => unreachable!("rejected above"),
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes.into_iter().flatten() {
        match o {
            Outcome::Row(r) => rows.push(r),
            Outcome::Skip(s) => skipped.push(s),
        }
    }
    BoundReport::from_rows(theorem, tolerance, rows, skipped)
}
