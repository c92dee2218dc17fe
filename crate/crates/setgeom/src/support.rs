//! Lazy support-function algebra.
//!
//! Sets are represented as expression trees over base polytopes and boxes.
//! Every node evaluates its support function exactly except `Inter`, which
//! over-approximates an intersection by the minimum of member supports (the
//! standard sound relaxation; exact for the boxes it is used on here).

use crate::error::{Result, SetgeomError};
use crate::polytope::{Polytope, Support};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum SupportSet {
    Poly(Arc<Polytope>),
    /// Axis-aligned box [lo, hi].
    Box(DVector<f64>, DVector<f64>),
    Point(DVector<f64>),
    /// Image under a linear map.
    Linear(Arc<DMatrix<f64>>, Arc<SupportSet>),
    /// Nonnegative scaling.
    Scale(f64, Arc<SupportSet>),
    /// Minkowski sum.
    Sum(Vec<SupportSet>),
    /// Intersection, supported by min of member supports (over-approximate).
    Inter(Vec<SupportSet>),
    /// Convex hull of a union, supported by max of member supports.
    Hull(Vec<SupportSet>),
}

impl SupportSet {
    pub fn poly(p: Polytope) -> Self {
        SupportSet::Poly(Arc::new(p))
    }

    pub fn point(x: DVector<f64>) -> Self {
        SupportSet::Point(x)
    }

    pub fn linear(m: DMatrix<f64>, s: SupportSet) -> Self {
        SupportSet::Linear(Arc::new(m), Arc::new(s))
    }

    pub fn scale(k: f64, s: SupportSet) -> Result<Self> {
        if k < 0.0 {
            return Err(SetgeomError::InvalidParameter(format!(
                "scale factor must be nonnegative, got {k}"
            )));
        }
        if k == 0.0 {
            let n = s.dim();
            return Ok(SupportSet::Point(DVector::zeros(n)));
        }
        Ok(SupportSet::Scale(k, Arc::new(s)))
    }

    pub fn translate(self, v: &DVector<f64>) -> Self {
        SupportSet::Sum(vec![self, SupportSet::Point(v.clone())])
    }

    pub fn dim(&self) -> usize {
        match self {
            SupportSet::Poly(p) => p.dim(),
            SupportSet::Box(lo, _) => lo.len(),
            SupportSet::Point(x) => x.len(),
            SupportSet::Linear(m, _) => m.nrows(),
            SupportSet::Scale(_, s) => s.dim(),
            SupportSet::Sum(v) | SupportSet::Inter(v) | SupportSet::Hull(v) => {
                v.first().map(|s| s.dim()).unwrap_or(0)
            }
        }
    }

    /// Support function in direction `dir`. +inf when unbounded, -inf when
    /// empty.
    pub fn support(&self, dir: &DVector<f64>) -> f64 {
        match self {
            SupportSet::Poly(p) => match p.support(dir) {
                Support::Value { rho, .. } => rho,
                Support::Unbounded => f64::INFINITY,
                Support::Empty => f64::NEG_INFINITY,
            },
            SupportSet::Box(lo, hi) => {
                let mut rho = 0.0;
                for i in 0..lo.len() {
                    rho += if dir[i] >= 0.0 {
                        dir[i] * hi[i]
                    } else {
                        dir[i] * lo[i]
                    };
                }
                rho
            }
            SupportSet::Point(x) => dir.dot(x),
            SupportSet::Linear(m, s) => s.support(&(m.transpose() * dir)),
            SupportSet::Scale(k, s) => k * s.support(dir),
            SupportSet::Sum(v) => v.iter().map(|s| s.support(dir)).sum(),
            SupportSet::Inter(v) => v
                .iter()
                .map(|s| s.support(dir))
                .fold(f64::INFINITY, f64::min),
            SupportSet::Hull(v) => v
                .iter()
                .map(|s| s.support(dir))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// A support point: a maximizer of `dir . x` over the represented set.
    /// Exact for every node kind except `Inter` (which returns None) and
    /// propagates None upward.
    pub fn support_point(&self, dir: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SupportSet::Poly(p) => match p.support(dir) {
                Support::Value { point, .. } => Some(point),
                _ => None,
            },
            SupportSet::Box(lo, hi) => {
                let mut x = DVector::zeros(lo.len());
                for i in 0..lo.len() {
                    x[i] = if dir[i] >= 0.0 { hi[i] } else { lo[i] };
                }
                Some(x)
            }
            SupportSet::Point(x) => Some(x.clone()),
            SupportSet::Linear(m, s) => s
                .support_point(&(m.transpose() * dir))
                .map(|x| m.as_ref() * x),
            SupportSet::Scale(k, s) => s.support_point(dir).map(|x| x * *k),
            SupportSet::Sum(v) => {
                let mut acc = DVector::zeros(self.dim());
                for s in v {
                    acc += s.support_point(dir)?;
                }
                Some(acc)
            }
            SupportSet::Inter(_) => None,
            SupportSet::Hull(v) => {
                let mut best: Option<(f64, DVector<f64>)> = None;
                for s in v {
                    let rho = s.support(dir);
                    if best.as_ref().map_or(true, |(b, _)| rho > *b) {
                        best = Some((rho, s.support_point(dir)?));
                    }
                }
                best.map(|(_, x)| x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_box_set(n: usize) -> SupportSet {
        SupportSet::Box(DVector::from_element(n, -1.0), DVector::from_element(n, 1.0))
    }

    fn dir(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn sum_of_unit_boxes_supports_add() {
        // Minkowski sum of two unit boxes in direction (1,1) is 2 + 2.
        let s = SupportSet::Sum(vec![unit_box_set(2), unit_box_set(2)]);
        assert_relative_eq!(s.support(&dir(&[1., 1.])), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_image_rotates_support() {
        // 90 degree rotation of [-1,1]x[-2,2]: x-extent becomes 2.
        let b = SupportSet::Box(dir(&[-1., -2.]), dir(&[1., 2.]));
        let rot = DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.]);
        let s = SupportSet::linear(rot, b);
        assert_relative_eq!(s.support(&dir(&[1., 0.])), 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.support(&dir(&[0., 1.])), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scale_zero_collapses_to_origin() {
        let s = SupportSet::scale(0.0, unit_box_set(3)).unwrap();
        assert_eq!(s.support(&dir(&[1., 1., 1.])), 0.0);
        assert!(SupportSet::scale(-0.5, unit_box_set(3)).is_err());
    }

    #[test]
    fn inter_takes_min_support() {
        let small = SupportSet::Box(dir(&[-0.5, -0.5]), dir(&[0.5, 0.5]));
        let s = SupportSet::Inter(vec![unit_box_set(2), small]);
        assert_relative_eq!(s.support(&dir(&[1., 0.])), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn hull_takes_max_support() {
        let shifted = unit_box_set(2).translate(&dir(&[3., 0.]));
        let s = SupportSet::Hull(vec![unit_box_set(2), shifted]);
        assert_relative_eq!(s.support(&dir(&[1., 0.])), 4.0, epsilon = 1e-12);
        assert_relative_eq!(s.support(&dir(&[-1., 0.])), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn support_points_maximize() {
        let s = SupportSet::Sum(vec![
            unit_box_set(2),
            SupportSet::poly(
                Polytope::from_box(&dir(&[0., 0.]), &dir(&[2., 1.])).unwrap(),
            ),
        ]);
        let d = dir(&[1., 1.]);
        let p = s.support_point(&d).unwrap();
        assert_relative_eq!(d.dot(&p), s.support(&d), epsilon = 1e-9);
    }
}
