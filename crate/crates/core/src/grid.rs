//! Sampling grids shared by sweeps and validators.

/// `count` evenly spaced points per axis over [lo, hi]ⁿ, first axis slowest.
pub fn lattice(dim: usize, lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if count == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
    };
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Default q̄-clock times for bound sweeps.
pub const STANDARD_T_BARS: [f64; 9] = [0.02, 0.05, 0.1, 0.2, 0.35, 0.45, 0.5, 0.7, 0.9];

/// Times used by the score-field consistency checks.
pub const CONSISTENCY_T_BARS: [f64; 4] = [0.1, 0.3, 0.5, 0.9];

/// (t, x) pairs over `times` × lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub points: Vec<(f64, Vec<f64>)>,
}

impl SweepGrid {
    pub fn product(times: &[f64], xs: &[Vec<f64>]) -> Self {
        let points = times.iter().flat_map(|&t| xs.iter().map(move |x| (t, x.clone()))).collect();
        Self { points }
    }

    /// Standard grid: STANDARD_T_BARS × 41-point lattice on [-4, 4]ⁿ.
    pub fn standard(dim: usize) -> Self {
        Self::product(&STANDARD_T_BARS, &lattice(dim, -4.0, 4.0, 41))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_shape() {
        let g = lattice(2, -1.0, 1.0, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, -1.0]);
        assert_eq!(g[1], vec![-1.0, 0.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
        assert_eq!(SweepGrid::standard(1).len(), 9 * 41);
    }
}
