use nalgebra::{DMatrix, DVector};

use super::{CompactMoments, LogMoments, ScoreEngine};
use crate::error::{Error, Result};
use crate::targets::{AxisBox, CompactForm, CompactMeasureSpec};

/// Relative log-weight below which panels are skipped.
const PRUNE_LOG: f64 = 60.0;

impl ScoreEngine {
    pub(super) fn compact_moments_of(&self, c: &CompactMeasureSpec, t: f64, x: &[f64]) -> Result<CompactMoments> {
        let n = c.dim();
        let mut acc = LogMoments::new(n, 0);
        match c.form() {
            CompactForm::WeightedPoints { points, weights } => {
                for (p, &w) in points.iter().zip(weights) {
                    if w > 0.0 {
                        acc.push(w.ln() - sq_dist(x, p) / (2.0 * t), p, &[]);
                    }
                }
            }
            _ => self.box_moments(c, t, x, &mut acc),
        }
        if !acc.log_total().is_finite() {
            return Err(Error::EmptySupport(format!(
                "all kernel weights vanish at t̄ = {t}, x = {x:?} (distance to support {})",
                c.distance(x)
            )));
        }
        let mut cov = DMatrix::from_row_slice(n, n, acc.cov());
        cov = 0.5 * (&cov + cov.transpose());
        let eig = cov.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&v| v < 0.0) {
            let clamped = eig.eigenvalues.map(|v| v.max(0.0));
            cov = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
        }
        Ok(CompactMoments { log_phat: acc.log_total(), ybar: DVector::from_column_slice(acc.mean()), cov })
    }

    /// Two-scale grid: Gauss–Legendre panels of width ~√t/8 inside a window of
    /// radius d(x, D₀) + 8√t, midpoint cells of width 2M/cells elsewhere.
    fn box_moments(&self, c: &CompactMeasureSpec, t: f64, x: &[f64], acc: &mut LogMoments) {
        let root = t.sqrt();
        let d = c.distance(x);
        let half = d + self.cfg.compact_fine_radius_factor * root;
        let window = AxisBox {
            lo: x.iter().map(|v| v - half).collect(),
            hi: x.iter().map(|v| v + half).collect(),
        };
        let fine = self.cfg.compact_fine_spacing_factor * root;
        let coarse = (2.0 * c.radius() / self.cfg.compact_coarse_cells as f64).max(f64::MIN_POSITIVE);
        let prune = d * d + 2.0 * t * PRUNE_LOG;
        let log_density = -c.total_volume().ln();
        for b in c.boxes() {
            match b.intersect(&window) {
                Some(inner) => {
                    self.panels(&inner, fine, x, t, prune, log_density, true, acc);
                    for piece in b.subtract(&inner) {
                        self.panels(&piece, coarse, x, t, prune, log_density, false, acc);
                    }
                }
                None => self.panels(b, coarse, x, t, prune, log_density, false, acc),
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn panels(
        &self,
        region: &AxisBox,
        width: f64,
        x: &[f64],
        t: f64,
        prune: f64,
        log_density: f64,
        gauss: bool,
        acc: &mut LogMoments,
    ) {
        let n = region.dim();
        let counts: Vec<usize> =
            (0..n).map(|a| ((region.hi[a] - region.lo[a]) / width).ceil().max(1.0) as usize).collect();
        let steps: Vec<f64> = (0..n).map(|a| (region.hi[a] - region.lo[a]) / counts[a] as f64).collect();
        let (nodes, weights): (&[f64], &[f64]) =
            if gauss { (self.fine_rule.nodes(), self.fine_rule.weights()) } else { (&[0.0], &[2.0]) };
        let q = nodes.len();
        let mut idx = vec![0usize; n];
        let mut cell = AxisBox { lo: vec![0.0; n], hi: vec![0.0; n] };
        let mut sub = vec![0usize; n];
        let mut y = vec![0.0; n];
        let sub_bounds = vec![q; n];
        'cells: loop {
            for a in 0..n {
                cell.lo[a] = region.lo[a] + steps[a] * idx[a] as f64;
                cell.hi[a] = if idx[a] + 1 == counts[a] { region.hi[a] } else { cell.lo[a] + steps[a] };
            }
            if cell.distance(x).powi(2) <= prune {
                let log_vol: f64 = (0..n).map(|a| (0.5 * (cell.hi[a] - cell.lo[a])).ln()).sum();
                sub.iter_mut().for_each(|s| *s = 0);
                loop {
                    let mut lw = log_density + log_vol;
                    for a in 0..n {
                        let h = 0.5 * (cell.hi[a] - cell.lo[a]);
                        y[a] = cell.lo[a] + h * (nodes[sub[a]] + 1.0);
                        lw += weights[sub[a]].ln();
                    }
                    acc.push(lw - sq_dist(x, &y) / (2.0 * t), &y, &[]);
                    if !advance(&mut sub, &sub_bounds) {
                        break;
                    }
                }
            }
            if !advance(&mut idx, &counts) {
                break 'cells;
            }
        }
    }
}

fn advance(idx: &mut [usize], bounds: &[usize]) -> bool {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < bounds[a] {
            return true;
        }
        idx[a] = 0;
    }
    false
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}
