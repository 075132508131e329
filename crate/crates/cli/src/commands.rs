//! Command bodies. Each returns the report outcome; I/O is left to `Outputs`.

use anyhow::Result;
use serde::Deserialize;
use serde_json::Value;

use score_lab::bounds::{sweep_verify, TheoremId, DEFAULT_TOLERANCE};
use score_lab::counterexample::{assemble_chain, block_ratio, verify_chain, RatioPath};
use score_lab::grid::{lattice, SweepGrid, STANDARD_T_BARS};
use score_lab::metrics::{kl_kde_1d, rate_fit, sample_moment, sliced_w1_2d, w1_1d_with_stderr};
use score_lab::sampler::{backward_run, forward_sample, make_score_source, EtaSpec, SamplerConfig, ScoreKind};
use score_lab::scorefield::ScoreEngine;
use score_lab::targets::TargetSpec;

use crate::config::{config_err, parse, Common, Format};
use crate::output::{Cell, Outputs, Table};

/// What a command produced: a label of what it checks and whether it found
/// assertion-style failures.
pub struct Outcome {
    pub checks: String,
    pub failed: bool,
}

fn check_keys(v: &Value, allowed: &[&str]) -> Result<()> {
    const COMMON: [&str; 4] = ["target", "output", "format", "quadrature"];
    if let Value::Object(m) = v {
        for k in m.keys() {
            if !COMMON.contains(&k.as_str()) && !allowed.contains(&k.as_str()) {
                return Err(config_err(format!("unknown config key `{k}`")));
            }
        }
    }
    Ok(())
}

fn engine(common: &Common) -> Result<ScoreEngine> {
    ScoreEngine::new(common.quadrature.clone()).map_err(|e| config_err(format!("quadrature: {e}")))
}

fn need_target(common: &Common) -> Result<TargetSpec> {
    common.target.as_ref().ok_or_else(|| config_err("`target` is required for this command"))?.build()
}

/// Library errors caused by the request rather than by numerics.
fn classify(e: score_lab::Error) -> anyhow::Error {
    use score_lab::Error as E;
    match e {
        E::UnknownTarget(_) | E::InvalidParameter { .. } | E::InvalidInput(_) | E::Inapplicable { .. } => {
            config_err(e.to_string())
        }
        other => other.into(),
    }
}

#[derive(Deserialize)]
struct VerifyCfg {
    theorem: String,
    t_bars: Option<Vec<f64>>,
    #[serde(default = "default_lo")]
    lo: f64,
    #[serde(default = "default_hi")]
    hi: f64,
    #[serde(default = "default_count")]
    count: usize,
    #[serde(default = "default_tol")]
    tolerance: f64,
}

fn default_lo() -> f64 {
    -4.0
}
fn default_hi() -> f64 {
    4.0
}
fn default_count() -> usize {
    41
}
fn default_tol() -> f64 {
    DEFAULT_TOLERANCE
}

pub fn verify_bounds(v: &Value, common: &Common, out: &mut Outputs) -> Result<Outcome> {
    check_keys(v, &["theorem", "t_bars", "lo", "hi", "count", "tolerance"])?;
    let cfg: VerifyCfg = parse(v)?;
    let theorem: TheoremId = cfg.theorem.parse().map_err(classify)?;
    let target = need_target(common)?;
    let engine = engine(common)?;
    if cfg.count == 0 || !(cfg.lo <= cfg.hi) || !(cfg.tolerance >= 0.0) {
        return Err(config_err("grid needs count ≥ 1, lo ≤ hi and tolerance ≥ 0"));
    }
    let times = cfg.t_bars.unwrap_or_else(|| STANDARD_T_BARS.to_vec());
    let grid = SweepGrid::product(&times, &lattice(target.dim(), cfg.lo, cfg.hi, cfg.count));
    let report = sweep_verify(&target, theorem, &grid, &engine, cfg.tolerance).map_err(classify)?;
    let body = match common.format {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            buf
        }
        Format::Json => report.to_json()?.into_bytes(),
    };
    out.write(&format!("bounds_{theorem}.{}", common.format.ext()), &body)?;
    let bad = report.violations().len();
    eprintln!(
        "{theorem} on {}: {} rows, {bad} violations, {} skipped beyond the horizon",
        target.name(),
        report.rows.len(),
        report.skipped.len()
    );
    Ok(Outcome { checks: theorem.to_string(), failed: bad > 0 })
}

#[derive(Deserialize)]
struct CounterCfg {
    #[serde(rename = "M", default = "default_ms")]
    ms: Vec<f64>,
    #[serde(rename = "K")]
    k: Option<usize>,
    #[serde(default = "default_margin")]
    margin: f64,
    #[serde(default = "default_half")]
    t_bar: f64,
}

fn default_ms() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}
fn default_margin() -> f64 {
    10.0
}
fn default_half() -> f64 {
    0.5
}

pub fn counterexample(v: &Value, common: &Common, out: &mut Outputs) -> Result<Outcome> {
    check_keys(v, &["M", "K", "margin", "t_bar"])?;
    let cfg: CounterCfg = parse(v)?;
    let engine = engine(common)?;
    let mut failed = false;
    let mut table = Table::new(&["M", "ratio", "ratio_quadrature", "rel_diff", "bound", "pass"]);
    for &m in &cfg.ms {
        let closed = block_ratio(m, RatioPath::ClosedForm, &engine).map_err(classify)?.ratio;
        let quad = block_ratio(m, RatioPath::Quadrature, &engine).map_err(classify)?.ratio;
        let bound = m * m / 3.0;
        let rel = (closed - quad).abs() / closed.abs();
        let pass = closed > bound && rel <= 1e-6;
        failed |= !pass;
        table.push(vec![m.into(), closed.into(), quad.into(), rel.into(), bound.into(), pass.into()]);
    }
    out.write(&format!("counterexample_blocks.{}", common.format.ext()), &table.render(common.format)?)?;
    if let Some(k) = cfg.k {
        let (chain, _) = assemble_chain(k, cfg.margin).map_err(classify)?;
        let ver = verify_chain(&chain, cfg.t_bar, &engine).map_err(classify)?;
        let mut t = Table::new(&["k", "center", "scale", "log_pbar_xx", "bound", "pass", "crosstalk"]);
        for r in &ver.rows {
            failed |= !r.pass;
            t.push(vec![r.k.into(), r.center.into(), r.scale.into(), r.value.into(), r.bound.into(), r.pass.into(), r.crosstalk.into()]);
        }
        out.write(&format!("counterexample_chain.{}", common.format.ext()), &t.render(common.format)?)?;
    }
    Ok(Outcome { checks: TheoremId::ChainLowerBound.to_string(), failed })
}

#[derive(Deserialize)]
struct ManifoldCfg {
    points: Vec<Vec<f64>>,
    #[serde(default = "default_ladder")]
    t_ladder: Vec<f64>,
}

fn default_ladder() -> Vec<f64> {
    vec![0.1, 0.05, 0.02, 0.01]
}

pub fn manifold(v: &Value, common: &Common, out: &mut Outputs) -> Result<Outcome> {
    check_keys(v, &["points", "t_ladder"])?;
    let cfg: ManifoldCfg = parse(v)?;
    let target = need_target(common)?;
    let engine = engine(common)?;
    let n = target.dim();
    if cfg.points.is_empty() || cfg.points.iter().any(|p| p.len() != n) {
        return Err(config_err(format!("`points` must be a nonempty list of {n}-vectors")));
    }
    let mut header = vec!["t_bar".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend(["t_hess_norm", "t2_variance_term"].map(String::from));
    let mut table = Table { header, rows: Vec::new() };
    for x in &cfg.points {
        for &t in &cfg.t_ladder {
            let h = engine.hess_qbar(&target, t, x).map_err(classify)?;
            let norm = h.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // t²(-Δq̄ + n/t)
            let var = t * t * (-h.trace() + n as f64 / t);
            let mut row: Vec<Cell> = vec![t.into()];
            row.extend(x.iter().map(|&v| Cell::from(v)));
            row.extend([Cell::from(t * norm), Cell::from(var)]);
            table.push(row);
        }
    }
    out.write(&format!("manifold.{}", common.format.ext()), &table.render(common.format)?)?;
    Ok(Outcome { checks: "compact-support growth ladder".into(), failed: false })
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum BaseScore {
    Exact,
    Quadrature,
}

#[derive(Deserialize)]
struct SamplerCfgRaw {
    #[serde(rename = "T")]
    t_end: f64,
    #[serde(rename = "N")]
    steps: Value,
    #[serde(default)]
    delta: f64,
    ensemble: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_score")]
    score: BaseScore,
    eta: Option<EtaSpec>,
    #[serde(default = "default_batches")]
    batches: usize,
}

fn default_score() -> BaseScore {
    BaseScore::Exact
}
fn default_batches() -> usize {
    20
}

impl SamplerCfgRaw {
    fn kind(&self) -> ScoreKind {
        let base = match self.score {
            BaseScore::Exact => ScoreKind::Exact,
            BaseScore::Quadrature => ScoreKind::Quadrature,
        };
        match &self.eta {
            Some(eta) => ScoreKind::Perturbed { base: Box::new(base), eta: eta.clone() },
            None => base,
        }
    }

    fn config(&self, steps: usize) -> Result<SamplerConfig> {
        let cfg = SamplerConfig { t_end: self.t_end, steps, delta: self.delta, ensemble: self.ensemble, seed: self.seed };
        cfg.validate().map_err(classify)?;
        Ok(cfg)
    }

    fn step_list(&self) -> Result<Vec<usize>> {
        match &self.steps {
            Value::Number(_) => Ok(vec![parse(&self.steps)?]),
            Value::Array(_) => parse(&self.steps),
            _ => Err(config_err("`N` must be a step count or a list of them")),
        }
    }
}

const SAMPLER_KEYS: [&str; 8] = ["T", "N", "delta", "ensemble", "seed", "score", "eta", "batches"];

/// Distance between terminal samples and a forward reference at time δ.
fn reference_distance(target: &TargetSpec, data: &[f64], cfg: &SamplerConfig, batches: usize) -> Result<(f64, f64)> {
    let n = target.dim();
    let reference = forward_sample(target, cfg.delta, cfg.ensemble, cfg.seed ^ 0x5eed).map_err(classify)?;
    match n {
        1 => {
            let r: Vec<f64> = reference.into_iter().map(|v| v[0]).collect();
            let e = w1_1d_with_stderr(data, &r, batches)?;
            Ok((e.value, e.stderr))
        }
        2 => {
            let a: Vec<[f64; 2]> = data.chunks(2).map(|c| [c[0], c[1]]).collect();
            let b: Vec<[f64; 2]> = reference.into_iter().map(|v| [v[0], v[1]]).collect();
            Ok((sliced_w1_2d(&a, &b, 64, cfg.seed)?, f64::NAN))
        }
        _ => Ok((f64::NAN, f64::NAN)),
    }
}

pub fn sample(v: &Value, common: &Common, out: &mut Outputs) -> Result<Outcome> {
    check_keys(v, &SAMPLER_KEYS)?;
    let raw: SamplerCfgRaw = parse(v)?;
    let target = need_target(common)?;
    let engine = engine(common)?;
    let steps = match raw.step_list()?.as_slice() {
        [n] => *n,
        _ => return Err(config_err("`sample` takes a single step count `N`")),
    };
    let cfg = raw.config(steps)?;
    let src = make_score_source(&raw.kind(), &target, &engine, cfg.delta).map_err(classify)?;
    let ens = backward_run(&cfg, &src).map_err(classify)?;
    let body = match common.format {
        Format::Csv => {
            let mut buf = Vec::new();
            ens.write_csv(&mut buf)?;
            buf
        }
        Format::Json => serde_json::to_vec(&ens)?,
    };
    out.write(&format!("samples.{}", common.format.ext()), &body)?;
    let (w, se) = reference_distance(&target, &ens.data, &cfg, raw.batches)?;
    let mut table = Table::new(&["metric", "value", "stderr", "N", "T", "delta", "ensemble", "source"]);
    let prov = src.provenance().to_string();
    let row = |metric: &str, value: f64, stderr: f64| {
        vec![
            metric.into(),
            value.into(),
            stderr.into(),
            cfg.steps.into(),
            cfg.t_end.into(),
            cfg.delta.into(),
            cfg.ensemble.into(),
            Cell::Text(prov.clone()),
        ]
    };
    let metric = if target.dim() == 2 { "sliced_w1_vs_forward" } else { "w1_vs_forward" };
    table.push(row(metric, w, se));
    for m in [2, 4] {
        if !ens.is_empty() {
            table.push(row(&format!("moment_{m}"), sample_moment(&ens.data, ens.dim, m)?, f64::NAN));
        }
    }
    table.push(row("excluded", ens.excluded as f64, 0.0));
    out.write(&format!("sample_metrics.{}", common.format.ext()), &table.render(common.format)?)?;
    Ok(Outcome { checks: "exponential-integrator sampler".into(), failed: false })
}

pub fn converge(v: &Value, common: &Common, out: &mut Outputs) -> Result<Outcome> {
    check_keys(v, &SAMPLER_KEYS)?;
    let raw: SamplerCfgRaw = parse(v)?;
    let target = need_target(common)?;
    let engine = engine(common)?;
    let steps = raw.step_list()?;
    if steps.len() < 4 {
        return Err(config_err("`converge` needs at least 4 step counts in `N`"));
    }
    let kind = raw.kind();
    let src = make_score_source(&kind, &target, &engine, raw.delta).map_err(classify)?;
    let mut table = Table::new(&["metric", "value", "stderr", "N", "T", "delta", "ensemble", "source"]);
    let prov = src.provenance().to_string();
    let law = target.closed_form().cloned();
    let mut pts = Vec::new();
    for &n in &steps {
        let cfg = raw.config(n)?;
        let ens = backward_run(&cfg, &src).map_err(classify)?;
        let (w, se) = reference_distance(&target, &ens.data, &cfg, raw.batches)?;
        let base = |metric: &str, value: f64, stderr: f64| -> Vec<Cell> {
            vec![
                metric.into(),
                value.into(),
                stderr.into(),
                n.into(),
                cfg.t_end.into(),
                cfg.delta.into(),
                cfg.ensemble.into(),
                Cell::Text(prov.clone()),
            ]
        };
        table.push(base("w1_vs_forward", w, se));
        pts.push((n as f64, w));
        if let (1, Some(law), true) = (target.dim(), &law, ens.len() >= 1000) {
            let evolved = law.at_time(cfg.delta)?;
            let sd = evolved.second_moment().sqrt();
            let lo = evolved.means().iter().map(|m| m[0]).fold(f64::INFINITY, f64::min) - 8.0 * sd;
            let hi = evolved.means().iter().map(|m| m[0]).fold(f64::NEG_INFINITY, f64::max) + 8.0 * sd;
            let kl = kl_kde_1d(&ens.data, |x| evolved.log_density(&[x]).exp(), (lo, hi))?;
            table.push(base("kl_kde_diagnostic", kl.value, f64::NAN));
        }
        table.push(base("excluded", ens.excluded as f64, 0.0));
    }
    match rate_fit(&pts) {
        Ok(fit) => {
            let tail = |metric: &str, value: f64| -> Vec<Cell> {
                vec![
                    metric.into(),
                    value.into(),
                    f64::NAN.into(),
                    0usize.into(),
                    raw.t_end.into(),
                    raw.delta.into(),
                    raw.ensemble.into(),
                    Cell::Text(if fit.degenerate { "degenerate".into() } else { prov.clone() }),
                ]
            };
            table.push(tail("rate_floor", fit.floor));
            table.push(tail("rate_coefficient", fit.coefficient));
            table.push(tail("rate_exponent", fit.exponent));
            table.push(tail("rate_residual", fit.residual));
        }
        Err(e) => return Err(classify(e)),
    }
    out.write(&format!("converge.{}", common.format.ext()), &table.render(common.format)?)?;
    Ok(Outcome { checks: "convergence in N (error ≈ a + b·N^-γ)".into(), failed: false })
}
