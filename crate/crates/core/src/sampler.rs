//! Forward OU sampling and the backward exponential-integrator scheme.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::report::fmt_float;
use crate::rng::{self, DOMAIN_BACKWARD, DOMAIN_FORWARD};
use crate::scorefield::ScoreEngine;
use crate::targets::{CompactForm, GaussianMixtureSpec, SmoothPotentialSpec, TargetPayload, TargetSpec};

/// Score ∇log p(t, ·) frozen at one forward time.
pub trait FrozenScore: Send + Sync {
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Time-dependent score field; `freeze` does the per-time setup once.
pub trait ScoreField: Send + Sync {
    fn dim(&self) -> usize;
    fn freeze(&self, t: f64) -> Result<Box<dyn FrozenScore + '_>>;
}

/// Deterministic perturbation η(t, x) added to a base score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaSpec {
    /// η ≡ c in every coordinate.
    Constant { c: f64 },
    /// η = c for t < t_cut, else 0.
    Step { c: f64, t_cut: f64 },
    /// η = c·x.
    Linear { c: f64 },
}

impl EtaSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            EtaSpec::Constant { c } | EtaSpec::Linear { c } => c.is_finite(),
            EtaSpec::Step { c, t_cut } => c.is_finite() && t_cut.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("eta", "coefficients must be finite"))
        }
    }

    pub fn apply(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match *self {
            EtaSpec::Constant { c } => out.iter_mut().for_each(|o| *o += c),
            EtaSpec::Step { c, t_cut } => {
                if t < t_cut {
                    out.iter_mut().for_each(|o| *o += c)
                }
            }
            EtaSpec::Linear { c } => out.iter_mut().zip(x).for_each(|(o, v)| *o += c * v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreKind {
    Exact,
    Quadrature,
    Perturbed { base: Box<ScoreKind>, eta: EtaSpec },
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreKind::Exact => f.write_str("exact"),
            ScoreKind::Quadrature => f.write_str("quadrature"),
            ScoreKind::Perturbed { base, eta } => write!(f, "perturbed({base}, {eta:?})"),
        }
    }
}

/// A score field with its provenance tag.
#[derive(Clone)]
pub struct ScoreSource {
    field: Arc<dyn ScoreField>,
    provenance: String,
}

impl fmt::Debug for ScoreSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreSource").field("provenance", &self.provenance).finish()
    }
}

impl ScoreSource {
    pub fn new(field: Arc<dyn ScoreField>, provenance: impl Into<String>) -> Self {
        Self { field, provenance: provenance.into() }
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn freeze(&self, t: f64) -> Result<Box<dyn FrozenScore + '_>> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::TimeOutOfRange { t, range: "(0, ∞)" });
        }
        self.field.freeze(t)
    }

    /// One-off evaluation; prefer [`ScoreSource::freeze`] in loops.
    pub fn score(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!("point has dimension {}, expected {}", x.len(), self.dim())));
        }
        let mut out = vec![0.0; x.len()];
        self.freeze(t)?.score_into(x, &mut out)?;
        Ok(out)
    }
}

struct ExactField {
    law: GaussianMixtureSpec,
}

struct ExactFrozen(GaussianMixtureSpec);

impl FrozenScore for ExactFrozen {
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.0.score_into(x, out);
        Ok(())
    }
}

impl ScoreField for ExactField {
    fn dim(&self) -> usize {
        self.law.dim()
    }
    fn freeze(&self, t: f64) -> Result<Box<dyn FrozenScore + '_>> {
        Ok(Box::new(ExactFrozen(self.law.at_time(t)?)))
    }
}

struct QuadratureField {
    target: TargetSpec,
    engine: ScoreEngine,
}

struct QuadratureFrozen<'a> {
    field: &'a QuadratureField,
    t: f64,
}

impl FrozenScore for QuadratureFrozen<'_> {
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let q = self.field.engine.evaluate_q(&self.field.target, self.t, x)?;
        out.copy_from_slice(q.score.as_slice());
        Ok(())
    }
}

impl ScoreField for QuadratureField {
    fn dim(&self) -> usize {
        self.target.dim()
    }
    fn freeze(&self, t: f64) -> Result<Box<dyn FrozenScore + '_>> {
        Ok(Box::new(QuadratureFrozen { field: self, t }))
    }
}

struct PerturbedField {
    base: Arc<dyn ScoreField>,
    eta: EtaSpec,
}

struct PerturbedFrozen<'a> {
    base: Box<dyn FrozenScore + 'a>,
    eta: &'a EtaSpec,
    t: f64,
}

impl FrozenScore for PerturbedFrozen<'_> {
    fn score_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.base.score_into(x, out)?;
        self.eta.apply(self.t, x, out);
        Ok(())
    }
}

impl ScoreField for PerturbedField {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn freeze(&self, t: f64) -> Result<Box<dyn FrozenScore + '_>> {
        Ok(Box::new(PerturbedFrozen { base: self.base.freeze(t)?, eta: &self.eta, t }))
    }
}

/// Builds a score source; `delta` is the early-stopping time of the intended run.
pub fn make_score_source(kind: &ScoreKind, target: &TargetSpec, engine: &ScoreEngine, delta: f64) -> Result<ScoreSource> {
    let field: Arc<dyn ScoreField> = build_field(kind, target, engine, delta)?;
    Ok(ScoreSource::new(field, format!("{kind} on {}", target.name())))
}

fn build_field(kind: &ScoreKind, target: &TargetSpec, engine: &ScoreEngine, delta: f64) -> Result<Arc<dyn ScoreField>> {
    Ok(match kind {
        ScoreKind::Exact => {
            let law = target.closed_form().ok_or_else(|| {
                Error::Unsupported(format!("`{}` has no closed-form score; use the quadrature source", target.name()))
            })?;
            Arc::new(ExactField { law: law.clone() })
        }
        ScoreKind::Quadrature => {
            if target.compact().is_some() && !(delta > 0.0) {
                return Err(Error::Domain(format!(
                    "quadrature score of compact target `{}` needs early stopping δ > 0",
                    target.name()
                )));
            }
            Arc::new(QuadratureField { target: target.clone(), engine: engine.clone() })
        }
        ScoreKind::Perturbed { base, eta } => {
            eta.validate()?;
            Arc::new(PerturbedField { base: build_field(base, target, engine, delta)?, eta: eta.clone() })
        }
    })
}

/// e^{dt/2}x + 2(e^{dt/2} - 1)s + √(e^{dt} - 1)ξ, written into `x`.
pub fn exp_step_into(x: &mut [f64], dt: f64, s: &[f64], noise: &[f64]) {
    let half = (0.5 * dt).exp();
    let drift = 2.0 * (0.5 * dt).exp_m1();
    let diff = dt.exp_m1().sqrt();
    for ((xi, si), zi) in x.iter_mut().zip(s).zip(noise) {
        *xi = half * *xi + drift * si + diff * zi;
    }
}

pub fn exp_step(x: &[f64], dt: f64, s: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", "must be finite and > 0"));
    }
    if s.len() != x.len() || noise.len() != x.len() {
        return Err(Error::InvalidInput("exp_step needs matching dimensions".into()));
    }
    let mut out = x.to_vec();
    exp_step_into(&mut out, dt, s, noise);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Forward horizon T.
    pub t_end: f64,
    pub steps: usize,
    pub delta: f64,
    pub ensemble: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(invalid("T", "must be finite and > 0"));
        }
        if self.steps < 1 {
            return Err(invalid("N", "must be ≥ 1"));
        }
        if !(self.delta >= 0.0 && self.delta < self.t_end) {
            return Err(invalid("delta", "must satisfy 0 ≤ δ < T"));
        }
        if self.ensemble < 1 {
            return Err(invalid("ensemble", "must be ≥ 1"));
        }
        Ok(())
    }

    /// Forward times t_k = δ + k(T - δ)/N, k = 0..=N.
    pub fn forward_grid(&self) -> Vec<f64> {
        let n = self.steps;
        (0..=n).map(|k| if k == n { self.t_end } else { self.delta + k as f64 * (self.t_end - self.delta) / n as f64 }).collect()
    }

    /// Forward times at which step k = 0..N-1 evaluates the score: t_{N-k}.
    pub fn evaluation_times(&self) -> Vec<f64> {
        let grid = self.forward_grid();
        (0..self.steps).map(|k| grid[self.steps - k]).collect()
    }

    pub fn step_size(&self) -> f64 {
        (self.t_end - self.delta) / self.steps as f64
    }
}

/// Terminal samples at forward time δ, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub dim: usize,
    pub data: Vec<f64>,
    /// Trajectories dropped for reaching a non-finite state.
    pub excluded: usize,
    pub config: SamplerConfig,
    pub provenance: String,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Coordinate `axis` of every sample.
    pub fn column(&self, axis: usize) -> Vec<f64> {
        self.data.iter().skip(axis).step_by(self.dim).copied().collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# score-lab {} | {} | T={} N={} delta={} ensemble={} seed={} excluded={}",
            env!("CARGO_PKG_VERSION"),
            self.provenance,
            fmt_float(self.config.t_end),
            self.config.steps,
            fmt_float(self.config.delta),
            self.config.ensemble,
            self.config.seed,
            self.excluded
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.dim).map(|i| format!("x{i}")))?;
        for row in self.data.chunks(self.dim) {
            w.write_record(row.iter().map(|v| fmt_float(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the exponential integrator from N(0, I) at t' = 0 to t' = T - δ.
pub fn backward_run(cfg: &SamplerConfig, source: &ScoreSource) -> Result<Ensemble> {
    cfg.validate()?;
    let n = source.dim();
    let dt = cfg.step_size();
    let frozen = cfg.evaluation_times().into_iter().map(|t| source.freeze(t)).collect::<Result<Vec<_>>>()?;
    let base = rng::keyed(cfg.seed, DOMAIN_BACKWARD);
    let results: Vec<Option<Vec<f64>>> = (0..cfg.ensemble as u64)
        .into_par_iter()
        .map(|traj| -> Result<Option<Vec<f64>>> {
            let mut r = base.clone();
            let mut x = vec![0.0; n];
            let mut s = vec![0.0; n];
            let mut noise = vec![0.0; n];
            rng::at(&mut r, traj, 0);
            rng::fill_normals(&mut r, &mut x);
            for (k, field) in frozen.iter().enumerate() {
                field.score_into(&x, &mut s)?;
                rng::at(&mut r, traj, k as u64 + 1);
                rng::fill_normals(&mut r, &mut noise);
                exp_step_into(&mut x, dt, &s, &noise);
                if x.iter().any(|v| !v.is_finite()) {
                    return Ok(None);
                }
            }
            Ok(Some(x))
        })
        .collect::<Result<_>>()?;
    let excluded = results.iter().filter(|r| r.is_none()).count();
    let data = results.into_iter().flatten().flatten().collect();
    Ok(Ensemble { dim: n, data, excluded, config: cfg.clone(), provenance: source.provenance().to_string() })
}

/// Rejection sampler for p₀ ∝ e^{-g(x) - |x|²/2} under
/// g(x) - g(x₀) ≥ -(α₂/2)|x - x₀|² - α₁.
struct Rejection<'a> {
    spec: &'a SmoothPotentialSpec,
    g0: f64,
    mean: Vec<f64>,
    scale: f64,
}

const PILOT_PROPOSALS: u64 = 10_000;
const MIN_ACCEPTANCE: f64 = 1e-4;

impl<'a> Rejection<'a> {
    fn new(spec: &'a SmoothPotentialSpec) -> Result<Self> {
        let md = spec.metadata();
        let (g0, _, _) = spec.eval(&md.x0)?;
        let k = 1.0 - md.alpha2;
        Ok(Self {
            spec,
            g0,
            mean: md.x0.iter().map(|v| -md.alpha2 * v / k).collect(),
            scale: 1.0 / k.sqrt(),
        })
    }

    /// Proposes from the envelope and returns (candidate, log acceptance).
    fn propose(&self, r: &mut rand_chacha::ChaCha8Rng, x: &mut [f64]) -> Result<f64> {
        let md = self.spec.metadata();
        rng::fill_normals(r, x);
        for (xi, m) in x.iter_mut().zip(&self.mean) {
            *xi = m + self.scale * *xi;
        }
        let (g, _, _) = self.spec.eval(x)?;
        let d2: f64 = x.iter().zip(&md.x0).map(|(a, b)| (a - b).powi(2)).sum();
        let la = self.g0 - md.alpha1 - g - 0.5 * md.alpha2 * d2;
        if la > 1e-9 {
            return Err(Error::Contract(format!(
                "log acceptance {la} > 0 at {x:?}: the α₁/α₂ metadata does not dominate g"
            )));
        }
        Ok(la)
    }

    fn pilot(&self, base: &rand_chacha::ChaCha8Rng) -> Result<()> {
        let mut r = base.clone();
        rng::at(&mut r, u64::MAX, 0);
        let mut x = vec![0.0; self.spec.dim()];
        let mut acc = 0.0;
        for _ in 0..PILOT_PROPOSALS {
            acc += self.propose(&mut r, &mut x)?.exp();
        }
        let rate = acc / PILOT_PROPOSALS as f64;
        if rate < MIN_ACCEPTANCE {
            return Err(Error::Sampling(format!(
                "rejection acceptance {rate:.3e} < {MIN_ACCEPTANCE:e} with envelope N(x̃, {:.3}²I)",
                self.scale
            )));
        }
        Ok(())
    }

    fn draw(&self, r: &mut rand_chacha::ChaCha8Rng, x: &mut [f64]) -> Result<()> {
        loop {
            let la = self.propose(r, x)?;
            if rng::uniform(r) < la.exp() {
                return Ok(());
            }
        }
    }
}

fn sample_mixture(m: &GaussianMixtureSpec, r: &mut rand_chacha::ChaCha8Rng, x: &mut [f64]) {
    let u = rng::uniform(r);
    let mut c = 0.0;
    let mut pick = m.len() - 1;
    for (i, w) in m.weights().iter().enumerate() {
        c += w;
        if u < c {
            pick = i;
            break;
        }
    }
    rng::fill_normals(r, x);
    let sd = m.variances()[pick].sqrt();
    for (xi, mu) in x.iter_mut().zip(&m.means()[pick]) {
        *xi = mu + sd * *xi;
    }
}

fn pick_weighted(weights: &[f64], total: f64, u: f64) -> usize {
    let mut c = 0.0;
    for (i, w) in weights.iter().enumerate() {
        c += w / total;
        if u < c {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws `count` samples of X_t = e^{-t/2}X₀ + √(1 - e^{-t})Z.
pub fn forward_sample(target: &TargetSpec, t: f64, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(t >= 0.0) || t.is_nan() {
        return Err(Error::TimeOutOfRange { t, range: "[0, ∞]" });
    }
    let n = target.dim();
    let base = rng::keyed(seed, DOMAIN_FORWARD);
    let rejection = match (target.payload(), target.closed_form()) {
        (TargetPayload::SmoothPotential(s), None) => {
            let rej = Rejection::new(s)?;
            rej.pilot(&base)?;
            Some(rej)
        }
        _ => None,
    };
    let keep = (-0.5 * t).exp();
    let noise = (-(-t).exp_m1()).sqrt();
    (0..count as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut r = base.clone();
            rng::at(&mut r, i, 0);
            let mut x = vec![0.0; n];
            match (target.payload(), &rejection) {
                (_, Some(rej)) => rej.draw(&mut r, &mut x)?,
                (TargetPayload::CompactMeasure(c), _) => match c.form() {
                    CompactForm::WeightedPoints { points, weights } => {
                        let total: f64 = weights.iter().sum();
                        x.copy_from_slice(&points[pick_weighted(weights, total, rng::uniform(&mut r))]);
                    }
                    _ => {
                        let vols: Vec<f64> = c.boxes().iter().map(|b| b.volume()).collect();
                        let b = &c.boxes()[pick_weighted(&vols, c.total_volume(), rng::uniform(&mut r))];
                        for a in 0..n {
                            x[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * rng::uniform(&mut r);
                        }
                    }
                },
                _ => sample_mixture(target.closed_form().expect("mixture law"), &mut r, &mut x),
            }
            if t > 0.0 {
                let mut z = vec![0.0; n];
                rng::at(&mut r, i, 1);
                rng::fill_normals(&mut r, &mut z);
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi = keep * *xi + noise * zi;
                }
            }
            Ok(x)
        })
        .collect()
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
    fn exp_step_examples() {
        let x = exp_step(&[1.5], 0.3, &[0.0], &[0.0]).unwrap();
        assert_relative_eq!(x[0], 1.5 * 0.15f64.exp(), epsilon = 1e-15);
        let x = exp_step(&[0.0], 2.0 * 2f64.ln(), &[1.0], &[0.0]).unwrap();
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-14);
        let x = exp_step(&[0.0], 2f64.ln(), &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-15);
        assert!(exp_step(&[0.0], 0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn early_stopping_never_reaches_delta() {
        let cfg = SamplerConfig { t_end: 2.0, steps: 7, delta: 0.1, ensemble: 1, seed: 0 };
        let times = cfg.evaluation_times();
        assert_eq!(times[0], 2.0);
        assert!(times.iter().all(|&t| t > cfg.delta));
        assert_relative_eq!(*times.last().unwrap(), 0.1 + 1.9 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn sources() {
        let e = ScoreEngine::default();
        let sn = target("std_normal", &[]);
        let exact = make_score_source(&ScoreKind::Exact, &sn, &e, 0.0).unwrap();
        assert_relative_eq!(exact.score(0.4, &[0.8]).unwrap()[0], -0.8, epsilon = 1e-15);
        let pert = ScoreKind::Perturbed { base: Box::new(ScoreKind::Exact), eta: EtaSpec::Constant { c: 0.1 } };
        let p = make_score_source(&pert, &sn, &e, 0.0).unwrap();
        assert_relative_eq!(p.score(0.4, &[0.8]).unwrap()[0], -0.7, epsilon = 1e-15);
        let tp = target("two_point", &[]);
        assert!(make_score_source(&ScoreKind::Quadrature, &tp, &e, 0.0).is_err());
        assert!(make_score_source(&ScoreKind::Quadrature, &tp, &e, 0.1).is_ok());
        assert!(make_score_source(&ScoreKind::Exact, &tp, &e, 0.1).is_err());
        let m2 = target("mixture2", &[]);
        let q = make_score_source(&ScoreKind::Quadrature, &m2, &e, 0.0).unwrap();
        let x = make_score_source(&ScoreKind::Exact, &m2, &e, 0.0).unwrap();
        let a = q.score(0.5, &[0.7]).unwrap()[0];
        let b = x.score(0.5, &[0.7]).unwrap()[0];
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }

    #[test]
    fn single_step_closed_form() {
        // T = log 4, N = 1, s ≡ 0: terminal = 2·initial + √3·noise, so variance 7.
        let sn = target("std_normal", &[]);
        let e = ScoreEngine::default();
        let zero = ScoreKind::Perturbed { base: Box::new(ScoreKind::Exact), eta: EtaSpec::Linear { c: 1.0 } };
        let src = make_score_source(&zero, &sn, &e, 0.0).unwrap();
        let cfg = SamplerConfig { t_end: 4f64.ln(), steps: 1, delta: 0.0, ensemble: 200_000, seed: 3 };
        let ens = backward_run(&cfg, &src).unwrap();
        let v = ens.data.iter().map(|x| x * x).sum::<f64>() / ens.len() as f64;
        let se = 7.0 * (2.0 / ens.len() as f64).sqrt();
        assert!((v - 7.0).abs() < 5.0 * se, "variance {v}");
    }

    #[test]
    fn runs_are_reproducible() {
        let m2 = target("mixture2", &[]);
        let e = ScoreEngine::default();
        let src = make_score_source(&ScoreKind::Exact, &m2, &e, 0.0).unwrap();
        let cfg = SamplerConfig { t_end: 2.0, steps: 9, delta: 0.0, ensemble: 500, seed: 11 };
        let a = backward_run(&cfg, &src).unwrap();
        let b = backward_run(&cfg, &src).unwrap();
        assert_eq!(a.data, b.data);
        let c = backward_run(&SamplerConfig { seed: 12, ..cfg }, &src).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn forward_second_moment() {
        let m2 = target("mixture2", &[]);
        for t in [0.0, 0.3, 2.0] {
            let xs = forward_sample(&m2, t, 200_000, 5).unwrap();
            let m: f64 = xs.iter().map(|x| x[0] * x[0]).sum::<f64>() / xs.len() as f64;
            let expect = (-t as f64).exp() * 1.25 + 1.0 - (-t as f64).exp();
            let m4: f64 = xs.iter().map(|x| x[0].powi(4)).sum::<f64>() / xs.len() as f64;
            let se = ((m4 - m * m) / xs.len() as f64).sqrt();
            assert!((m - expect).abs() < 5.0 * se, "t = {t}: {m} vs {expect}");
        }
    }

    #[test]
    fn rejection_sampler_on_cosine() {
        let c = target("cosine_potential", &[]);
        let xs = forward_sample(&c, 0.0, 20_000, 1).unwrap();
        assert_eq!(xs, forward_sample(&c, 0.0, 20_000, 1).unwrap());
        assert!(xs.iter().all(|x| x[0].is_finite()));
    }

    #[test]
    fn compact_sampling_stays_on_support() {
        let sq = target("notched_square", &[]);
        let xs = forward_sample(&sq, 0.0, 5000, 2).unwrap();
        let spec = sq.compact().unwrap();
        assert!(xs.iter().all(|x| spec.distance(x) == 0.0));
        let tp = target("two_point", &[]);
        let xs = forward_sample(&tp, 0.0, 1000, 2).unwrap();
        assert!(xs.iter().all(|x| x[0].abs() == 1.0));
    }
}
