//! Blocks g_M whose heat flow has (log p̄)_xx(1/2, 0) > M²/3, and chains of
//! them that defeat any uniform Hessian bound at t̄ = 1/2.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{BoundReport, BoundRow, TheoremId};
use crate::error::{invalid, Result};
use crate::scorefield::ScoreEngine;
use crate::targets::{Potential, PotentialMetadata, SmoothPotentialSpec, TargetSpec};

/// Error function, accurate to a few ulp.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// (g_M, g_M', g_M'') at `x`. Even, C^{1,1}, supported on [-2M, 2M].
pub fn g_block(m: f64, x: f64) -> (f64, f64, f64) {
    let s = x.signum();
    let a = x.abs();
    if a <= m {
        (2.0 * m * m - a * a, -2.0 * x, -2.0)
    } else if a <= 2.0 * m {
        let d = a - 2.0 * m;
        (d * d, 2.0 * d * s, 2.0)
    } else {
        (0.0, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSpec {
    pub scale: f64,
    pub center: f64,
}

impl BlockSpec {
    pub fn new(scale: f64, center: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !center.is_finite() {
            return Err(invalid("M", "block scale must be finite and > 0"));
        }
        Ok(Self { scale, center })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - 2.0 * self.scale, self.center + 2.0 * self.scale)
    }
}

/// Σ_k g_{M_k}(x - x_k) over blocks with disjoint supports.
#[derive(Debug, Clone, Serialize)]
pub struct ChainSpec {
    blocks: Vec<BlockSpec>,
    margin: f64,
    #[serde(skip)]
    kinks: Vec<f64>,
}

impl ChainSpec {
    pub fn new(blocks: Vec<BlockSpec>, margin: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("K", "need at least one block"));
        }
        if !(margin >= 0.0) {
            return Err(invalid("margin", "must be ≥ 0"));
        }
        for w in blocks.windows(2) {
            if w[1].support().0 - w[0].support().1 < margin - 1e-12 {
                return Err(invalid("blocks", "supports must be ordered with gap ≥ margin"));
            }
        }
        let mut kinks: Vec<f64> = blocks
            .iter()
            .flat_map(|b| {
                let (c, m) = (b.center, b.scale);
                [c - 2.0 * m, c - m, c + m, c + 2.0 * m]
            })
            .collect();
        kinks.sort_by(f64::total_cmp);
        Ok(Self { blocks, margin, kinks })
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }
    pub fn margin(&self) -> f64 {
        self.margin
    }
}

impl Potential for ChainSpec {
    fn dim(&self) -> usize {
        1
    }
    fn eval_into(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let (mut g, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for b in &self.blocks {
            let (lo, hi) = b.support();
            if x[0] > lo && x[0] < hi {
                let (a, da, dda) = g_block(b.scale, x[0] - b.center);
                g += a;
                d1 += da;
                d2 += dda;
            }
        }
        grad[0] = d1;
        hess[0] = d2;
        g
    }
    fn kinks(&self) -> &[f64] {
        &self.kinks
    }
}

/// Centers x₁ = 0, x_{k+1} = x_k + 2k + 2(k+1) + margin with scale k for block k.
pub fn chain_centers(k: usize, margin: f64) -> Vec<f64> {
    let mut centers = vec![0.0];
    for j in 1..k {
        let prev = centers[j - 1];
        centers.push(prev + 2.0 * j as f64 + 2.0 * (j + 1) as f64 + margin);
    }
    centers
}

/// Chain of K blocks with M0 = M1 = L = 2 metadata.
pub fn assemble_chain(k: usize, margin: f64) -> Result<(ChainSpec, SmoothPotentialSpec)> {
    if k < 1 {
        return Err(invalid("K", "must be ≥ 1"));
    }
    let blocks = chain_centers(k, margin)
        .into_iter()
        .enumerate()
        .map(|(j, c)| BlockSpec::new((j + 1) as f64, c))
        .collect::<Result<Vec<_>>>()?;
    let chain = ChainSpec::new(blocks, margin)?;
    let metadata = PotentialMetadata {
        m0: 2.0,
        m1: 2.0,
        l: 2.0,
        alpha1: 2.0,
        alpha2: 0.0,
        beta1: 2.0,
        beta2: 0.0,
        x0: vec![0.0],
        grad_sup: Some(2.0 * k as f64),
    };
    let spec = SmoothPotentialSpec::new(Arc::new(chain.clone()), metadata)?;
    Ok((chain, spec))
}

/// Single block g_M at the origin.
pub fn block_potential(m: f64) -> Result<SmoothPotentialSpec> {
    let chain = ChainSpec::new(vec![BlockSpec::new(m, 0.0)?], 0.0)?;
    let metadata = PotentialMetadata {
        m0: 2.0,
        m1: 2.0,
        l: 2.0,
        alpha1: 2.0 * m * m,
        alpha2: 0.0,
        beta1: 2.0,
        beta2: 0.0,
        x0: vec![0.0],
        grad_sup: Some(2.0 * m),
    };
    SmoothPotentialSpec::new(Arc::new(chain), metadata)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RatioPath {
    ClosedForm,
    Quadrature,
}

/// Terms of (log h_M)_xx(1/2, 0) = (A + B)/(C + D + E).
///
/// The quadrature path only fills `ratio`; the split is a closed-form device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockRatio {
    pub m: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub ratio: f64,
}

pub fn block_ratio(m: f64, path: RatioPath, engine: &ScoreEngine) -> Result<BlockRatio> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(invalid("M", "must be finite and > 0"));
    }
    match path {
        RatioPath::ClosedForm => Ok(block_ratio_closed(m)),
        RatioPath::Quadrature => {
            let spec = TargetSpec::from_smooth("counterexample_block", block_potential(m)?);
            let ev = engine.evaluate(&spec, 0.5, &[0.0], false)?;
            let nan = f64::NAN;
            Ok(BlockRatio { m, a: nan, b: nan, c: nan, d: nan, e: nan, ratio: -ev.hess_qbar[(0, 0)] })
        }
    }
}

fn block_ratio_closed(m: f64) -> BlockRatio {
    let pi = std::f64::consts::PI;
    let e2 = (-2.0 * m * m).exp();
    let i0 = (pi / 8.0).sqrt() * erf(2f64.sqrt() * m);
    let i1 = -0.25 * (-2.0 * m * m).exp_m1();
    let i2 = -0.25 * m * e2 + 0.25 * i0;
    let a = e2 * (4.0 * m * m * m / 3.0 + 2.0 * m);
    let b = e2 * (4.0 * i2 - 8.0 * m * i1 + (4.0 * m * m - 2.0) * i0);
    let c = e2 * m;
    let d = e2 * i0;
    let e = 0.5 * pi.sqrt() * erfc(2.0 * m);
    BlockRatio { m, a, b, c, d, e, ratio: (a + b) / (c + d + e) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainBlockRow {
    pub k: usize,
    pub center: f64,
    pub scale: f64,
    /// (log p̄)_xx at (t̄, x_k).
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    /// |value - value of block k alone|.
    pub crosstalk: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainVerification {
    pub t_bar: f64,
    pub rows: Vec<ChainBlockRow>,
    /// log ∫ e^{-g - x²/2} dx, finite when p₀ is normalizable.
    pub log_mass: f64,
    pub report: BoundReport,
}

/// Checks (log p̄)_xx(t̄, x_k) > k²/3 block by block.
pub fn verify_chain(chain: &ChainSpec, t_bar: f64, engine: &ScoreEngine) -> Result<ChainVerification> {
    let (_, spec) = assemble_from(chain)?;
    let target = TargetSpec::from_smooth("counterexample_chain", spec);
    let tol = 1e-9;
    let rows = chain
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(j, b)| {
            let value = -engine.evaluate(&target, t_bar, &[b.center], false)?.hess_qbar[(0, 0)];
            let alone = TargetSpec::from_smooth("counterexample_block", block_potential(b.scale)?);
            let iso = -engine.evaluate(&alone, t_bar, &[0.0], false)?.hess_qbar[(0, 0)];
            let k = j + 1;
            let bound = b.scale * b.scale / 3.0;
            Ok(ChainBlockRow {
                k,
                center: b.center,
                scale: b.scale,
                value,
                bound,
                pass: value > bound - tol,
                crosstalk: (value - iso).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let log_mass = engine.log_pbar(&target, 1.0, &[0.0])? + 0.5 * (2.0 * std::f64::consts::PI).ln();
    let report = BoundReport::from_rows(
        TheoremId::ChainLowerBound,
        tol,
        rows.iter()
            .map(|r| BoundRow::new(t_bar, vec![r.center], "log_pbar_xx", r.bound, r.value, r.value - r.bound, tol))
            .collect(),
        Vec::new(),
    )?;
    Ok(ChainVerification { t_bar, rows, log_mass, report })
}

fn assemble_from(chain: &ChainSpec) -> Result<(ChainSpec, SmoothPotentialSpec)> {
    let k = chain.blocks().len();
    let metadata = PotentialMetadata {
        m0: 2.0,
        m1: 2.0,
        l: 2.0,
        alpha1: 2.0 * chain.blocks()[0].scale.powi(2),
        alpha2: 0.0,
        beta1: 2.0,
        beta2: 0.0,
        x0: vec![0.0],
        grad_sup: Some(2.0 * chain.blocks().iter().map(|b| b.scale).fold(0.0, f64::max).max(k as f64)),
    };
    Ok((chain.clone(), SmoothPotentialSpec::new(Arc::new(chain.clone()), metadata)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn block_is_c11_at_joints() {
        for m in [0.5, 1.0, 3.0] {
            let eps = 1e-12;
            for joint in [m, 2.0 * m] {
                let (l, dl, _) = g_block(m, joint - eps);
                let (r, dr, _) = g_block(m, joint + eps);
                assert!((l - r).abs() < 1e-9 && (dl - dr).abs() < 1e-9);
            }
            assert_eq!(g_block(m, m).0, m * m);
        }
    }

    #[test]
    fn erf_reference_values() {
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(f64::INFINITY), 1.0);
        assert_relative_eq!(erf(1.0), 0.842_700_792_949_714_9, epsilon = 1e-15);
        assert_relative_eq!(erf(-0.5), -0.520_499_877_813_046_5, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_ratio_references() {
        // Independent mpmath evaluation of (A+B)/(C+D+E).
        for (m, want) in [
            (1.0, 2.003_407_127_706_361),
            (2.0, 7.639_592_751_235_663),
            (4.0, 26.976_870_515_060_952),
            (8.0, 97.658_248_434_984_4),
        ] {
            assert_relative_eq!(block_ratio_closed(m).ratio, want, max_relative = 1e-12);
        }
        assert!(block_ratio_closed(1e-4).ratio.abs() < 1e-6);
    }

    #[test]
    fn chain_spacing() {
        assert_eq!(chain_centers(1, 10.0), vec![0.0]);
        assert_eq!(chain_centers(3, 10.0), vec![0.0, 16.0, 36.0]);
        let (chain, _) = assemble_chain(2, 10.0).unwrap();
        assert_eq!(chain.blocks()[0].support(), (-2.0, 2.0));
    }
}
