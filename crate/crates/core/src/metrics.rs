//! Distances between sample sets, score-error measurement, moments and rate fits.

use rand_core::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rng::{self, DOMAIN_EPS0, DOMAIN_METRIC};
use crate::sampler::{forward_sample, ScoreSource};
use crate::scorefield::ScoreEngine;
use crate::targets::{CompactForm, TargetSpec};

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.par_sort_unstable_by(f64::total_cmp);
    s
}

/// Linear-interpolated empirical quantile of sorted data at level q ∈ [0, 1].
fn quantile(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    let f = pos - i as f64;
    s[i] + f * (s[i + 1] - s[i])
}

/// Matched order-statistic differences; the larger set is read at the
/// smaller set's plotting positions when sizes differ.
fn coupled_gaps(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("w1 needs nonempty sample sets".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("w1 samples must be finite".into()));
    }
    let (sa, sb) = (sorted(a), sorted(b));
    if sa.len() == sb.len() {
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).collect());
    }
    let (small, large) = if sa.len() < sb.len() { (&sa, &sb) } else { (&sb, &sa) };
    let m = small.len();
    Ok((0..m).map(|i| (small[i] - quantile(large, (i as f64 + 0.5) / m as f64)).abs()).collect())
}

/// W₁ between two 1D empirical measures.
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    let g = coupled_gaps(a, b)?;
    Ok(g.iter().sum::<f64>() / g.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// W₁ with a batch-means standard error: both sets are dealt into `batches`
/// interleaved parts and the spread of per-part W₁ is scaled by 1/√batches.
pub fn w1_1d_with_stderr(a: &[f64], b: &[f64], batches: usize) -> Result<Estimate> {
    let value = w1_1d(a, b)?;
    if batches < 2 || a.len() < batches || b.len() < batches {
        return Ok(Estimate { value, stderr: f64::NAN });
    }
    let parts: Vec<f64> = (0..batches)
        .into_par_iter()
        .map(|j| {
            let pa: Vec<f64> = a.iter().skip(j).step_by(batches).copied().collect();
            let pb: Vec<f64> = b.iter().skip(j).step_by(batches).copied().collect();
            w1_1d(&pa, &pb)
        })
        .collect::<Result<_>>()?;
    let mean = parts.iter().sum::<f64>() / batches as f64;
    let var = parts.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(Estimate { value, stderr: (var / batches as f64).sqrt() })
}

/// Sliced W₁ for 2D samples: mean of 1D W₁ over `directions` angles
/// θ_k = π(k + u)/directions with a seeded offset u. An approximation of W₁.
pub fn sliced_w1_2d(a: &[[f64; 2]], b: &[[f64; 2]], directions: usize, seed: u64) -> Result<f64> {
    if directions == 0 {
        return Err(invalid("directions", "must be ≥ 1"));
    }
    let mut r = rng::keyed(seed, DOMAIN_METRIC);
    let u = rng::uniform(&mut r);
    let vals: Vec<f64> = (0..directions)
        .into_par_iter()
        .map(|k| {
            let th = std::f64::consts::PI * (k as f64 + u) / directions as f64;
            let (s, c) = th.sin_cos();
            let pa: Vec<f64> = a.iter().map(|p| c * p[0] + s * p[1]).collect();
            let pb: Vec<f64> = b.iter().map(|p| c * p[0] + s * p[1]).collect();
            w1_1d(&pa, &pb)
        })
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / directions as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KdeKl {
    pub value: f64,
    pub bandwidth: f64,
}

const KDE_GRID: usize = 4096;
const LOG_FLOOR: f64 = -700.0;

/// KL(p₀ ∥ KDE) with a Silverman-bandwidth Gaussian KDE, integrated by the
/// trapezoid rule over `window` (which should hold all but 1e-9 of p₀).
pub fn kl_kde_1d<F: Fn(f64) -> f64>(samples: &[f64], density: F, window: (f64, f64)) -> Result<KdeKl> {
    if samples.len() < 1000 {
        return Err(Error::InvalidInput(format!("kl_kde_1d needs ≥ 1000 samples, got {}", samples.len())));
    }
    if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
        return Err(invalid("window", "needs finite lo < hi"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let s = sorted(samples);
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = (0.9 * spread * n.powf(-0.2)).max(1e-12);

    // Linear binning onto a grid that extends the window by 8h.
    let (lo, hi) = (window.0 - 8.0 * h, window.1 + 8.0 * h);
    let m = KDE_GRID;
    let dx = (hi - lo) / (m - 1) as f64;
    let mut bins = vec![0.0; m];
    for &x in &s {
        let pos = (x - lo) / dx;
        if pos < 0.0 || pos > (m - 1) as f64 {
            continue;
        }
        let i = (pos.floor() as usize).min(m - 2);
        let f = pos - i as f64;
        bins[i] += 1.0 - f;
        bins[i + 1] += f;
    }
    let reach = ((8.0 * h / dx).ceil() as usize).min(m);
    let kernel: Vec<f64> = (0..=reach).map(|j| (-0.5 * (j as f64 * dx / h).powi(2)).exp()).collect();
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let kde: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let a = i.saturating_sub(reach);
            let b = (i + reach).min(m - 1);
            (a..=b).map(|j| bins[j] * kernel[i.abs_diff(j)]).sum::<f64>() * norm
        })
        .collect();

    let mut total = 0.0;
    for (i, &q) in kde.iter().enumerate() {
        let x = lo + i as f64 * dx;
        if x < window.0 - 0.5 * dx || x > window.1 + 0.5 * dx {
            continue;
        }
        let p = density(x);
        if !p.is_finite() || p < 0.0 {
            return Err(Error::NonFinite(format!("density {p} at x = {x}")));
        }
        if p == 0.0 {
            continue;
        }
        let lq = if q > 0.0 { q.ln().max(LOG_FLOOR) } else { LOG_FLOOR };
        let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
        total += w * p * (p.ln() - lq) * dx;
    }
    Ok(KdeKl { value: total, bandwidth: h })
}

/// ε₀ with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eps0 {
    pub value: f64,
    pub stderr: f64,
    /// (1/T)Σ(t_k - t_{k-1})E‖∇log p - s‖² itself.
    pub mean_square: f64,
}

/// √((1/t_N) Σ_k (t_k - t_{k-1}) E_{X ∼ P_{t_k}}‖reference - source‖²) by Monte Carlo.
pub fn eps0(
    source: &ScoreSource,
    reference: &ScoreSource,
    target: &TargetSpec,
    schedule: &[f64],
    mc: usize,
    seed: u64,
) -> Result<Eps0> {
    if schedule.len() < 2 || schedule.windows(2).any(|w| !(w[1] > w[0])) || !(schedule[0] >= 0.0) {
        return Err(Error::InvalidInput("eps0 schedule must be strictly increasing from t₀ ≥ 0".into()));
    }
    if mc < 2 {
        return Err(invalid("mc", "must be ≥ 2"));
    }
    let horizon = *schedule.last().expect("nonempty");
    let mut r = rng::keyed(seed, DOMAIN_EPS0);
    let mut mean_sq = 0.0;
    let mut var = 0.0;
    for w in schedule.windows(2) {
        let (t_prev, t) = (w[0], w[1]);
        let weight = (t - t_prev) / horizon;
        let xs = forward_sample(target, t, mc, r.next_u64())?;
        let fs = source.freeze(t)?;
        let fr = reference.freeze(t)?;
        let errs: Vec<f64> = xs
            .par_iter()
            .map(|x| {
                let mut a = vec![0.0; x.len()];
                let mut b = vec![0.0; x.len()];
                fs.score_into(x, &mut a)?;
                fr.score_into(x, &mut b)?;
                Ok(a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum())
            })
            .collect::<Result<_>>()?;
        let m = errs.iter().sum::<f64>() / mc as f64;
        let v = errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (mc - 1) as f64;
        mean_sq += weight * m;
        var += weight * weight * v / mc as f64;
    }
    let value = mean_sq.sqrt();
    let stderr = if value > 0.0 { var.sqrt() / (2.0 * value) } else { var.sqrt().sqrt() };
    Ok(Eps0 { value, stderr, mean_square: mean_sq })
}

/// Fit of error(N) ≈ a + b·N^{-γ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub floor: f64,
    pub coefficient: f64,
    pub exponent: f64,
    /// Sum of squared log-domain residuals.
    pub residual: f64,
    /// Set when the errors carry no N-dependence to fit.
    pub degenerate: bool,
}

fn log_fit(points: &[(f64, f64)], a: f64) -> (f64, f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.1 - a).ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    (icpt.exp(), -slope, res)
}

/// Scans the floor a ∈ [0, min error) on a log-spaced grid of gaps, refines by
/// golden section and fits (log b, γ) by least squares in the log domain at each trial floor.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::InvalidInput(format!("rate_fit needs ≥ 4 points, got {}", points.len())));
    }
    if points.iter().any(|&(n, e)| !(n > 0.0) || !n.is_finite() || !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput("rate_fit needs positive finite N and errors".into()));
    }
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("rate_fit needs distinct N values".into()));
    }
    let lo_e = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi_e = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if hi_e - lo_e <= 1e-12 * hi_e {
        return Ok(RateFit { floor: lo_e, coefficient: 0.0, exponent: 0.0, residual: 0.0, degenerate: true });
    }
    // Search over the gap lo_e - a on a log scale so floors just below the
    // smallest error are resolved as well as floors near zero.
    let floor_at = |u: f64| (lo_e - u.exp()).max(0.0);
    let cost = |u: f64| log_fit(points, floor_at(u)).2;
    let (u_lo, u_hi) = ((lo_e * 1e-12).ln(), lo_e.ln());
    let scan = 400;
    let step = (u_hi - u_lo) / scan as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..=scan {
        let c = cost(u_lo + step * i as f64);
        if c < best {
            best = c;
            best_i = i;
        }
    }
    let (mut a, mut b) = (u_lo + step * (best_i as f64 - 1.0).max(0.0), u_lo + step * ((best_i + 1).min(scan) as f64));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = cost(d);
        }
        if b - a <= 1e-13 {
            break;
        }
    }
    let u_best = if cost(0.5 * (a + b)) <= best { 0.5 * (a + b) } else { u_lo + step * best_i as f64 };
    let floor = floor_at(u_best);
    let (coefficient, exponent, residual) = log_fit(points, floor);
    Ok(RateFit { floor, coefficient, exponent, residual, degenerate: false })
}

fn check_order(m: u32) -> Result<()> {
    if matches!(m, 2 | 4 | 8) {
        Ok(())
    } else {
        Err(invalid("m", format!("moment order must be 2, 4 or 8, got {m}")))
    }
}

/// E|X|^m over row-major samples of dimension `dim`.
pub fn sample_moment(data: &[f64], dim: usize, m: u32) -> Result<f64> {
    check_order(m)?;
    if dim == 0 || data.is_empty() || data.len() % dim != 0 {
        return Err(Error::InvalidInput("samples must be a nonempty multiple of dim".into()));
    }
    let k = data.len() / dim;
    Ok(data.chunks(dim).map(|x| x.iter().map(|v| v * v).sum::<f64>().powi(m as i32 / 2)).sum::<f64>() / k as f64)
}

/// E_{p₀}|X|^m by quadrature.
pub fn target_moment(target: &TargetSpec, m: u32, engine: &ScoreEngine) -> Result<f64> {
    check_order(m)?;
    let pow = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().powi(m as i32 / 2);
    if let Some(spec) = target.smooth() {
        return engine.smooth_expectation(spec, pow);
    }
    let c = target.compact().expect("targets are smooth or compact");
    match c.form() {
        CompactForm::WeightedPoints { points, weights } => {
            let total: f64 = weights.iter().sum();
            Ok(points.iter().zip(weights).map(|(p, w)| w * pow(p)).sum::<f64>() / total)
        }
        _ => {
            // Polynomial integrand of degree ≤ 8: exact with 5 Gauss–Legendre nodes per axis.
            let gl = GaussLegendre::new(5)?;
            let mut sum = 0.0;
            for b in c.boxes() {
                let n = b.dim();
                let mut idx = vec![0usize; n];
                let mut y = vec![0.0; n];
                loop {
                    let mut w = 1.0;
                    for a in 0..n {
                        let h = 0.5 * (b.hi[a] - b.lo[a]);
                        y[a] = b.lo[a] + h * (gl.nodes()[idx[a]] + 1.0);
                        w *= h * gl.weights()[idx[a]];
                    }
                    sum += w * pow(&y);
                    let mut a = n;
                    loop {
                        if a == 0 {
                            break;
                        }
                        a -= 1;
                        idx[a] += 1;
                        if idx[a] < gl.order() {
                            break;
                        }
                        idx[a] = 0;
                    }
                    if idx.iter().all(|&i| i == 0) {
                        break;
                    }
                }
            }
            Ok(sum / c.total_volume())
        }
    }
}
