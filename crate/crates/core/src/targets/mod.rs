//! Target laws p₀ and the regularity metadata the bounds consume.

mod compact;
mod mixture;
mod potential;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use compact::{AxisBox, CompactForm, CompactMeasureSpec};
pub use mixture::GaussianMixtureSpec;
pub use potential::{
    mixture_metadata, ConstantPotential, CosinePotential, MixturePotential, Potential, PotentialMetadata,
    SmoothPotentialSpec,
};

use crate::counterexample;
use crate::error::{invalid, Error, Result};

pub type ParamMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    GaussianMixture,
    SmoothPotential,
    CompactMeasure,
}

#[derive(Debug, Clone)]
pub enum TargetPayload {
    GaussianMixture(GaussianMixtureSpec),
    SmoothPotential(SmoothPotentialSpec),
    CompactMeasure(CompactMeasureSpec),
}

/// Immutable target description. Mixtures also carry their derived potential.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    name: String,
    payload: TargetPayload,
    smooth: Option<SmoothPotentialSpec>,
}

impl TargetSpec {
    pub fn from_mixture(name: &str, mix: GaussianMixtureSpec) -> Result<Self> {
        let md = mixture_metadata(&mix);
        let smooth = SmoothPotentialSpec::new(Arc::new(MixturePotential::new(mix.clone())), md)?.with_law(mix.clone())?;
        Ok(Self { name: name.to_string(), payload: TargetPayload::GaussianMixture(mix), smooth: Some(smooth) })
    }

    pub fn from_smooth(name: &str, spec: SmoothPotentialSpec) -> Self {
        Self { name: name.to_string(), payload: TargetPayload::SmoothPotential(spec.clone()), smooth: Some(spec) }
    }

    pub fn from_compact(name: &str, spec: CompactMeasureSpec) -> Self {
        Self { name: name.to_string(), payload: TargetPayload::CompactMeasure(spec), smooth: None }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> TargetKind {
        match self.payload {
            TargetPayload::GaussianMixture(_) => TargetKind::GaussianMixture,
            TargetPayload::SmoothPotential(_) => TargetKind::SmoothPotential,
            TargetPayload::CompactMeasure(_) => TargetKind::CompactMeasure,
        }
    }

    pub fn payload(&self) -> &TargetPayload {
        &self.payload
    }

    pub fn dim(&self) -> usize {
        match &self.payload {
            TargetPayload::GaussianMixture(m) => m.dim(),
            TargetPayload::SmoothPotential(s) => s.dim(),
            TargetPayload::CompactMeasure(c) => c.dim(),
        }
    }

    /// Potential view: the potential itself, or the one derived from a mixture.
    pub fn smooth(&self) -> Option<&SmoothPotentialSpec> {
        self.smooth.as_ref()
    }

    pub fn compact(&self) -> Option<&CompactMeasureSpec> {
        match &self.payload {
            TargetPayload::CompactMeasure(c) => Some(c),
            _ => None,
        }
    }

    /// Closed-form law when one is known.
    pub fn closed_form(&self) -> Option<&GaussianMixtureSpec> {
        match &self.payload {
            TargetPayload::GaussianMixture(m) => Some(m),
            TargetPayload::SmoothPotential(s) => s.law(),
            TargetPayload::CompactMeasure(_) => None,
        }
    }

    pub fn metadata(&self) -> Option<&PotentialMetadata> {
        self.smooth.as_ref().map(SmoothPotentialSpec::metadata)
    }
}

pub fn mixture_at_time(spec: &GaussianMixtureSpec, t: f64) -> Result<GaussianMixtureSpec> {
    spec.at_time(t)
}

pub fn eval_potential(spec: &SmoothPotentialSpec, x: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    spec.eval(x)
}

struct Params<'a> {
    name: &'a str,
    map: &'a ParamMap,
    used: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn get(&mut self, key: &'static str, default: Option<f64>) -> Result<f64> {
        self.used.push(key);
        match (self.map.get(key), default) {
            (Some(v), _) if v.is_finite() => Ok(*v),
            (Some(v), _) => Err(invalid(key, format!("must be finite, got {v}"))),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(invalid(key, format!("required by `{}`", self.name))),
        }
    }

    fn dim(&mut self) -> Result<usize> {
        let d = self.get("dim", Some(1.0))?;
        if d < 1.0 || d.fract() != 0.0 {
            return Err(invalid("dim", "must be a positive integer"));
        }
        Ok(d as usize)
    }

    fn finish(self) -> Result<()> {
        for k in self.map.keys() {
            if !self.used.contains(&k.as_str()) {
                return Err(invalid(k, format!("not a parameter of `{}`", self.name)));
            }
        }
        Ok(())
    }
}

pub const CATALOG: &[&str] = &[
    "std_normal",
    "gaussian",
    "mixture2",
    "cosine_potential",
    "counterexample_block",
    "counterexample_chain",
    "two_point",
    "point_mass",
    "segment",
    "notched_square",
];

/// Built-in targets by name.
pub fn catalog(name: &str, params: &ParamMap) -> Result<TargetSpec> {
    let mut p = Params { name, map: params, used: Vec::new() };
    let spec = match name {
        "std_normal" => {
            let n = p.dim()?;
            let md = PotentialMetadata {
                m0: 0.0,
                m1: 0.0,
                l: 0.0,
                alpha1: 0.0,
                alpha2: 0.0,
                beta1: 0.0,
                beta2: 0.0,
                x0: vec![0.0; n],
                grad_sup: Some(0.0),
            };
            let g = ConstantPotential { dim: n, value: 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() };
            let law = GaussianMixtureSpec::gaussian(vec![0.0; n], 1.0)?;
            TargetSpec::from_smooth(name, SmoothPotentialSpec::new(Arc::new(g), md)?.with_law(law)?)
        }
        "gaussian" => {
            let n = p.dim()?;
            let s2 = p.get("sigma2", Some(1.0))?;
            if !(s2 > 0.0) {
                return Err(invalid("sigma2", "must be > 0"));
            }
            TargetSpec::from_mixture(name, GaussianMixtureSpec::gaussian(vec![0.0; n], s2)?)?
        }
        "mixture2" => {
            let w = p.get("w", Some(0.5))?;
            let mu1 = p.get("mu1", Some(-1.0))?;
            let mu2 = p.get("mu2", Some(1.0))?;
            let s2 = p.get("sigma2", Some(0.25))?;
            if !(w > 0.0 && w < 1.0) {
                return Err(invalid("w", "must lie in (0, 1)"));
            }
            if !(s2 > 0.0) {
                return Err(invalid("sigma2", "must be > 0"));
            }
            let mix = GaussianMixtureSpec::new(vec![w, 1.0 - w], vec![vec![mu1], vec![mu2]], vec![s2, s2])?;
            TargetSpec::from_mixture(name, mix)?
        }
        "cosine_potential" => {
            let a = p.get("a", Some(1.0))?;
            let b = p.get("b", Some(1.0))?;
            if !(a > 0.0) || !(b > 0.0) {
                return Err(invalid("a", "cosine_potential needs a > 0 and b > 0"));
            }
            let k = a * b * b;
            let md = PotentialMetadata {
                m0: k,
                m1: k,
                l: k,
                alpha1: 2.0 * a,
                alpha2: 0.0,
                beta1: k,
                beta2: 0.0,
                x0: vec![0.0],
                grad_sup: Some(a * b),
            };
            TargetSpec::from_smooth(name, SmoothPotentialSpec::new(Arc::new(CosinePotential { a, b }), md)?)
        }
        "counterexample_block" => {
            let m = p.get("M", Some(1.0))?;
            TargetSpec::from_smooth(name, counterexample::block_potential(m)?)
        }
        "counterexample_chain" => {
            let k = p.get("K", Some(3.0))?;
            let margin = p.get("margin", Some(10.0))?;
            if k < 1.0 || k.fract() != 0.0 {
                return Err(invalid("K", "must be a positive integer"));
            }
            TargetSpec::from_smooth(name, counterexample::assemble_chain(k as usize, margin)?.1)
        }
        "two_point" => {
            let a = p.get("a", Some(1.0))?;
            if !(a > 0.0) {
                return Err(invalid("a", "must be > 0"));
            }
            let form = CompactForm::WeightedPoints { points: vec![vec![-a], vec![a]], weights: vec![0.5, 0.5] };
            TargetSpec::from_compact(name, CompactMeasureSpec::new(form, None)?)
        }
        "point_mass" => {
            let y = p.get("y", Some(0.0))?;
            let form = CompactForm::WeightedPoints { points: vec![vec![y]], weights: vec![1.0] };
            TargetSpec::from_compact(name, CompactMeasureSpec::new(form, None)?)
        }
        "segment" => {
            let lo = p.get("lo", Some(-1.0))?;
            let hi = p.get("hi", Some(1.0))?;
            let form = CompactForm::UniformSegment1d { intervals: vec![(lo, hi)] };
            TargetSpec::from_compact(name, CompactMeasureSpec::new(form, None)?)
        }
        "notched_square" => {
            let rect = |a: f64, b: f64, c: f64, d: f64| AxisBox::new(vec![a, c], vec![b, d]);
            let rectangles = vec![rect(-2.0, 0.0, -2.0, 2.0)?, rect(0.0, 2.0, 1.0, 2.0)?, rect(0.0, 2.0, -2.0, -1.0)?];
            TargetSpec::from_compact(name, CompactMeasureSpec::new(CompactForm::UniformPolygonal2d { rectangles }, None)?)
        }
        other => return Err(Error::UnknownTarget(other.to_string())),
    };
    p.finish()?;
    Ok(spec)
}

/// Observed regularity against declared metadata.
#[derive(Debug, Clone, Serialize)]
pub struct MetadataReport {
    pub applicable: bool,
    pub points: usize,
    /// max over the grid of -λ_min(D²g), floored at 0.
    pub observed_m0: f64,
    /// max over the grid of λ_max(D²g), floored at 0.
    pub observed_m1: f64,
    pub observed_l: f64,
    /// max of -(α₂/2)|x|² - α₁ - (g(x) - g(0)), positive means violated.
    pub tail_violation: f64,
    /// max of |∇g(x)| / (|x| + 1).
    pub observed_growth: f64,
    pub declared: Option<PotentialMetadata>,
    pub violations: Vec<String>,
}

/// Scans `grid` and compares D²g, the Gaussian tail condition and gradient
/// growth against the declared constants. Violations are data.
pub fn validate_metadata(spec: &TargetSpec, grid: &[Vec<f64>]) -> MetadataReport {
    let mut report = MetadataReport {
        applicable: false,
        points: grid.len(),
        observed_m0: 0.0,
        observed_m1: 0.0,
        observed_l: 0.0,
        tail_violation: f64::NEG_INFINITY,
        observed_growth: 0.0,
        declared: spec.metadata().cloned(),
        violations: Vec::new(),
    };
    let Some(smooth) = spec.smooth() else {
        report.violations.push("compact measure: no potential to validate".into());
        return report;
    };
    report.applicable = true;
    let md = smooth.metadata();
    let n = smooth.dim();
    let g0 = match smooth.eval(&vec![0.0; n]) {
        Ok((g, _, _)) => g,
        Err(e) => {
            report.violations.push(format!("g(0): {e}"));
            return report;
        }
    };
    for x in grid {
        let (g, grad, hess) = match smooth.eval(x) {
            Ok(v) => v,
            Err(e) => {
                report.violations.push(format!("{e}"));
                continue;
            }
        };
        let eig = hess.symmetric_eigenvalues();
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        report.observed_m0 = report.observed_m0.max(-lo);
        report.observed_m1 = report.observed_m1.max(hi);
        report.observed_l = report.observed_l.max(lo.abs().max(hi.abs()));
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let tail = -0.5 * md.alpha2 * r2 - md.alpha1 - (g - g0);
        report.tail_violation = report.tail_violation.max(tail);
        report.observed_growth = report.observed_growth.max(grad.norm() / (r2.sqrt() + 1.0));
    }
    let tol = |v: f64| 1e-9 * v.max(1.0);
    let growth = md.beta1.max(md.beta2);
    for (label, obs, dec) in [
        ("M0", report.observed_m0, md.m0),
        ("M1", report.observed_m1, md.m1),
        ("L", report.observed_l, md.l),
        ("linear growth", report.observed_growth, growth),
    ] {
        if obs > dec + tol(dec) {
            report.violations.push(format!("{label}: observed {obs} exceeds declared {dec}"));
        }
    }
    if report.tail_violation > tol(md.alpha1) {
        report.violations.push(format!("tail condition violated by {}", report.tail_violation));
    }
    report
}
