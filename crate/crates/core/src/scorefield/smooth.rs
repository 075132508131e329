use nalgebra::{DMatrix, DVector};

use super::{LogMoments, ScoreEngine, ScoreEval};
use crate::error::{Error, Result};
use crate::targets::SmoothPotentialSpec;

/// Node u with the log weight of e^{-|u|²} du folded in.
struct Node {
    u: [f64; 2],
    log_w: f64,
}

impl ScoreEngine {
    /// 1D rule for ∫ e^{-u²} F(u) du.
    ///
    /// Nodes are rescaled by κ = 1 - α₂t̄ so that e^{-u²}h(x - su), which decays
    /// like e^{-κu²}, is smooth in the rule variable. Kinks of g, mapped to u,
    /// become panel edges of a composite Gauss–Legendre rule.
    fn rule_1d(&self, kappa: f64, kinks_u: &[f64]) -> Vec<(f64, f64)> {
        let root = kappa.sqrt();
        if kinks_u.is_empty() {
            let shift = -0.5 * kappa.ln();
            return self
                .gh(1)
                .nodes()
                .iter()
                .zip(self.gh(1).log_weights())
                .map(|(&v, &lw)| (v / root, lw + shift - v * v * (1.0 / kappa - 1.0)))
                .collect();
        }
        let reach = self.cfg.kink_cutoff / root;
        let mut edges: Vec<f64> = kinks_u.iter().copied().filter(|u| u.abs() < reach).collect();
        edges.push(-reach);
        edges.push(reach);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let rule = &self.kink_rule;
        let mut out = Vec::new();
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let panels = ((b - a) / self.cfg.kink_panel_width).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + h * p as f64;
                for (&s, &w) in rule.nodes().iter().zip(rule.weights()) {
                    let u = lo + 0.5 * h * (s + 1.0);
                    out.push((u, (0.5 * h * w).ln() - u * u));
                }
            }
        }
        out
    }

    fn gh(&self, dim: usize) -> &crate::quadrature::GaussHermite {
        if dim == 1 {
            &self.gh_1d
        } else {
            &self.gh_2d
        }
    }

    fn smooth_nodes(&self, spec: &SmoothPotentialSpec, t_bar: f64, x: &[f64]) -> Result<Vec<Node>> {
        let n = spec.dim();
        let kappa = 1.0 - spec.metadata().alpha2 * t_bar;
        let s = (2.0 * t_bar).sqrt();
        match n {
            1 => {
                let kinks_u: Vec<f64> = spec.kinks().iter().map(|b| (x[0] - b) / s).collect();
                Ok(self.rule_1d(kappa, &kinks_u).into_iter().map(|(u, lw)| Node { u: [u, 0.0], log_w: lw }).collect())
            }
            2 => {
                if !spec.kinks().is_empty() {
                    return Err(Error::Unsupported("kinked potentials are one-dimensional only".into()));
                }
                let root = kappa.sqrt();
                let shift = -0.5 * kappa.ln();
                let gh = self.gh(2);
                let axis: Vec<(f64, f64)> = gh
                    .nodes()
                    .iter()
                    .zip(gh.log_weights())
                    .map(|(&v, &lw)| (v / root, lw + shift - v * v * (1.0 / kappa - 1.0)))
                    .collect();
                let mut out = Vec::with_capacity(axis.len() * axis.len());
                for &(u0, w0) in &axis {
                    for &(u1, w1) in &axis {
                        out.push(Node { u: [u0, u1], log_w: w0 + w1 });
                    }
                }
                Ok(out)
            }
            _ => Err(Error::Unsupported(format!("smooth quadrature in dimension {n}"))),
        }
    }

    pub(super) fn smooth_eval(
        &self,
        spec: &SmoothPotentialSpec,
        t_bar: f64,
        x: &[f64],
        with_time: bool,
    ) -> Result<ScoreEval> {
        let n = spec.dim();
        let s = (2.0 * t_bar).sqrt();
        let nodes = self.smooth_nodes(spec, t_bar, x)?;
        let extra_len = n * n + if with_time { 2 * n } else { 0 };
        let mut acc = LogMoments::new(n, extra_len);
        let mut y = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let mut extra = vec![0.0; extra_len];
        let pot = spec.potential();
        for node in &nodes {
            let u = &node.u[..n];
            for i in 0..n {
                y[i] = x[i] - s * u[i];
            }
            let g = pot.eval_into(&y, &mut grad, &mut hess);
            if !g.is_finite() || grad.iter().chain(&hess).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "g = {g} at y = {y:?} (node u = {u:?}, t̄ = {t_bar}, x = {x:?})"
                )));
            }
            extra[..n * n].copy_from_slice(&hess);
            if with_time {
                let gu: f64 = grad.iter().zip(u).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    extra[n * n + i] = (0..n).map(|j| hess[i * n + j] * u[j]).sum();
                    extra[n * n + n + i] = grad[i] * gu;
                }
            }
            acc.push(node.log_w - g, &grad, &extra);
        }
        let log_pbar = acc.log_total() - 0.5 * n as f64 * std::f64::consts::PI.ln();
        if !log_pbar.is_finite() {
            return Err(Error::NonFinite(format!(
                "log p̄ = {log_pbar} at t̄ = {t_bar}, x = {x:?} over {} nodes",
                nodes.len()
            )));
        }
        let grad_qbar = DVector::from_column_slice(acc.mean());
        let a = DMatrix::from_row_slice(n, n, &acc.extra()[..n * n]);
        let cov = DMatrix::from_row_slice(n, n, acc.cov());
        let mut hess_qbar = &a - cov;
        hess_qbar = 0.5 * (&hess_qbar + hess_qbar.transpose());
        let (qbar_t, grad_qbar_t) = if with_time {
            let qt = 0.5 * (hess_qbar.trace() - grad_qbar.norm_squared());
            let hu = DVector::from_column_slice(&acc.extra()[n * n..n * n + n]);
            let ggu = DVector::from_column_slice(&acc.extra()[n * n + n..]);
            let gqt = -(hu - ggu) / s + &grad_qbar * qt;
            (Some(qt), Some(gqt))
        } else {
            (None, None)
        };
        Ok(ScoreEval {
            t_bar,
            x: DVector::from_column_slice(x),
            log_pbar,
            grad_qbar,
            hess_qbar,
            qbar_t,
            grad_qbar_t,
            upper_a: Some(0.5 * (&a + a.transpose())),
        })
    }

    /// E_{p₀}[f(X)] using the t̄ = 1, x = 0 rule, where y = -√2 u.
    pub(crate) fn smooth_expectation<F: Fn(&[f64]) -> f64>(&self, spec: &SmoothPotentialSpec, f: F) -> Result<f64> {
        let n = spec.dim();
        let zero = vec![0.0; n];
        let nodes = self.smooth_nodes(spec, 1.0, &zero)?;
        let mut acc = LogMoments::new(0, 1);
        let mut y = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        for node in &nodes {
            for i in 0..n {
                y[i] = -std::f64::consts::SQRT_2 * node.u[i];
            }
            let g = spec.potential().eval_into(&y, &mut grad, &mut hess);
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("g = {g} at y = {y:?}")));
            }
            acc.push(node.log_w - g, &[], &[f(&y)]);
        }
        Ok(acc.extra()[0])
    }
}
