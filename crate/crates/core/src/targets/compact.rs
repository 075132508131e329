use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Closed axis-aligned box [lo, hi] in ℝ¹ or ℝ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("box", "corner dimensions differ"));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(invalid("box", "corners must be finite"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(invalid("box", "needs lo < hi on every axis"));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Euclidean distance from `x` to the box.
    pub fn distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&a, &b))| {
                let d = if v < a { a - v } else if v > b { v - b } else { 0.0 };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest |y| over the box, attained at a corner.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a.abs().max(b.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(AxisBox { lo, hi })
        } else {
            None
        }
    }

    /// self minus `hole` (hole ⊆ self) as disjoint boxes.
    pub fn subtract(&self, hole: &AxisBox) -> Vec<AxisBox> {
        let mut out = Vec::new();
        let mut rest = self.clone();
        for axis in 0..self.dim() {
            if rest.lo[axis] < hole.lo[axis] {
                let mut piece = rest.clone();
                piece.hi[axis] = hole.lo[axis];
                out.push(piece);
            }
            if hole.hi[axis] < rest.hi[axis] {
                let mut piece = rest.clone();
                piece.lo[axis] = hole.hi[axis];
                out.push(piece);
            }
            rest.lo[axis] = hole.lo[axis];
            rest.hi[axis] = hole.hi[axis];
        }
        out
    }
}

/// Support description of π₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CompactForm {
    WeightedPoints { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Uniform law on a union of rectangles with disjoint interiors.
    UniformPolygonal2d { rectangles: Vec<AxisBox> },
    /// Uniform law on a union of disjoint intervals.
    UniformSegment1d { intervals: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactMeasureSpec {
    dim: usize,
    form: CompactForm,
    radius: f64,
    #[serde(skip)]
    boxes: Vec<AxisBox>,
}

impl CompactMeasureSpec {
    /// `radius = None` uses the tightest M for the support.
    pub fn new(form: CompactForm, radius: Option<f64>) -> Result<Self> {
        let (dim, tight, boxes) = match &form {
            CompactForm::WeightedPoints { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(invalid("points", "need matching nonempty points and weights"));
                }
                let dim = points[0].len();
                if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
                    return Err(invalid("points", "inconsistent or non-finite coordinates"));
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(invalid("weights", "must be nonnegative"));
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(invalid("weights", format!("sum to {s}, expected 1")));
                }
                let tight = points
                    .iter()
                    .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                (dim, tight, Vec::new())
            }
            CompactForm::UniformPolygonal2d { rectangles } => {
                if rectangles.iter().any(|b| b.dim() != 2) {
                    return Err(invalid("rectangles", "must be two-dimensional"));
                }
                let boxes = rectangles.clone();
                check_disjoint(&boxes)?;
                (2, boxes.iter().map(AxisBox::max_norm).fold(0.0, f64::max), boxes)
            }
            CompactForm::UniformSegment1d { intervals } => {
                let boxes = intervals
                    .iter()
                    .map(|&(a, b)| AxisBox::new(vec![a], vec![b]))
                    .collect::<Result<Vec<_>>>()?;
                check_disjoint(&boxes)?;
                (1, boxes.iter().map(AxisBox::max_norm).fold(0.0, f64::max), boxes)
            }
        };
        if !(1..=2).contains(&dim) {
            return Err(invalid("dim", "compact measures are supported in dimensions 1 and 2"));
        }
        if matches!(form, CompactForm::UniformPolygonal2d { .. } | CompactForm::UniformSegment1d { .. })
            && boxes.is_empty()
        {
            return Err(invalid("region", "must have positive measure"));
        }
        let radius = match radius {
            Some(r) if r.is_finite() && r >= tight - 1e-12 => r,
            Some(r) => return Err(invalid("radius", format!("{r} does not contain the support (needs ≥ {tight})"))),
            None => tight,
        };
        Ok(Self { dim, form, radius, boxes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn form(&self) -> &CompactForm {
        &self.form
    }
    /// M with supp π₀ ⊂ B_M(0).
    pub fn radius(&self) -> f64 {
        self.radius
    }
    /// Region pieces for the uniform forms, empty for atoms.
    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }
    pub fn total_volume(&self) -> f64 {
        self.boxes.iter().map(AxisBox::volume).sum()
    }

    /// Distance from `x` to the support.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match &self.form {
            CompactForm::WeightedPoints { points, weights } => points
                .iter()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(p, _)| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min),
            _ => self.boxes.iter().map(|b| b.distance(x)).fold(f64::INFINITY, f64::min),
        }
    }
}

fn check_disjoint(boxes: &[AxisBox]) -> Result<()> {
    for (i, a) in boxes.iter().enumerate() {
        for b in &boxes[i + 1..] {
            if a.intersect(b).is_some() {
                return Err(invalid("region", "pieces must have disjoint interiors"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtract_partitions_volume() {
        let outer = AxisBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let hole = AxisBox::new(vec![0.0, -1.0], vec![1.0, 0.5]).unwrap();
        let pieces = outer.subtract(&hole);
        let v: f64 = pieces.iter().map(AxisBox::volume).sum();
        assert!((v + hole.volume() - outer.volume()).abs() < 1e-12);
        for (i, a) in pieces.iter().enumerate() {
            assert!(a.intersect(&hole).is_none());
            for b in &pieces[i + 1..] {
                assert!(a.intersect(b).is_none());
            }
        }
    }

    #[test]
    fn radius_must_cover_support() {
        let form = CompactForm::UniformSegment1d { intervals: vec![(-1.0, 2.0)] };
        assert_eq!(CompactMeasureSpec::new(form.clone(), None).unwrap().radius(), 2.0);
        assert!(CompactMeasureSpec::new(form, Some(1.5)).is_err());
    }

    #[test]
    fn overlapping_rectangles_rejected() {
        let a = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = AxisBox::new(vec![0.5, 0.5], vec![2.0, 2.0]).unwrap();
        assert!(CompactMeasureSpec::new(CompactForm::UniformPolygonal2d { rectangles: vec![a, b] }, None).is_err());
    }
}
