/// Streaming weighted mean/covariance with log weights (West's update).
///
/// `cov_dim` coordinates get mean and covariance, `mean_dim` extra
/// coordinates get the mean only.
#[derive(Debug, Clone)]
pub(crate) struct LogMoments {
    log_total: f64,
    mean: Vec<f64>,
    cov: Vec<f64>,
    extra: Vec<f64>,
    delta: Vec<f64>,
    n: usize,
}

impl LogMoments {
    pub fn new(cov_dim: usize, mean_dim: usize) -> Self {
        Self {
            log_total: f64::NEG_INFINITY,
            mean: vec![0.0; cov_dim],
            cov: vec![0.0; cov_dim * cov_dim],
            extra: vec![0.0; mean_dim],
            delta: vec![0.0; cov_dim],
            n: cov_dim,
        }
    }

    pub fn push(&mut self, log_w: f64, z: &[f64], extra: &[f64]) {
        if log_w == f64::NEG_INFINITY {
            return;
        }
        let (hi, lo) = if log_w > self.log_total { (log_w, self.log_total) } else { (self.log_total, log_w) };
        let new_total = hi + (lo - hi).exp().ln_1p();
        let r = (log_w - new_total).exp();
        self.log_total = new_total;
        let n = self.n;
        for i in 0..n {
            self.delta[i] = z[i] - self.mean[i];
            self.mean[i] += r * self.delta[i];
        }
        let keep = 1.0 - r;
        for i in 0..n {
            for j in 0..n {
                let c = &mut self.cov[i * n + j];
                *c = keep * (*c + r * self.delta[i] * self.delta[j]);
            }
        }
        for (e, v) in self.extra.iter_mut().zip(extra) {
            *e += r * (v - *e);
        }
    }

    pub fn log_total(&self) -> f64 {
        self.log_total
    }
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
    /// Row-major normalized covariance.
    pub fn cov(&self) -> &[f64] {
        &self.cov
    }
    pub fn extra(&self) -> &[f64] {
        &self.extra
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass() {
        let data = [(0.3f64, 1.0f64), (-2.0, 4.0), (1.1, -3.0), (-700.0, 50.0), (0.0, 2.5)];
        let mut acc = LogMoments::new(1, 1);
        for &(lw, z) in &data {
            acc.push(lw, &[z], &[z * z]);
        }
        let top = data.iter().map(|d| d.0).fold(f64::MIN, f64::max);
        let w: Vec<f64> = data.iter().map(|d| (d.0 - top).exp()).collect();
        let s: f64 = w.iter().sum();
        let m: f64 = data.iter().zip(&w).map(|(d, w)| w * d.1).sum::<f64>() / s;
        let v: f64 = data.iter().zip(&w).map(|(d, w)| w * (d.1 - m).powi(2)).sum::<f64>() / s;
        assert!((acc.log_total() - (top + s.ln())).abs() < 1e-14);
        assert!((acc.mean()[0] - m).abs() < 1e-14);
        assert!((acc.cov()[0] - v).abs() < 1e-13);
        assert!((acc.extra()[0] - (v + m * m)).abs() < 1e-13);
    }
}
