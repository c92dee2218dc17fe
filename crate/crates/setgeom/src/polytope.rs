//! Convex polytopes in halfspace representation.

use crate::error::{Result, SetgeomError};
use crate::lp::{self, LpResult};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// `{x : A x <= b}`. Rows may be redundant; `canonicalize` removes them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

/// Support evaluation outcome for one direction.
#[derive(Debug, Clone)]
pub enum Support {
    /// Finite support value together with a maximizer.
    Value { rho: f64, point: DVector<f64> },
    /// The set is unbounded in this direction.
    Unbounded,
    /// The set is empty (support is -infinity).
    Empty,
}

impl Support {
    pub fn rho(&self) -> f64 {
        match self {
            Support::Value { rho, .. } => *rho,
            Support::Unbounded => f64::INFINITY,
            Support::Empty => f64::NEG_INFINITY,
        }
    }
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(SetgeomError::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        Ok(Self { a, b })
    }

    /// R^n (no constraints).
    pub fn whole_space(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, dim),
            b: DVector::zeros(0),
        }
    }

    /// Canonical empty polytope in R^dim (0 <= -1).
    pub fn empty(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(1, dim),
            b: DVector::from_element(1, -1.0),
        }
    }

    /// Axis-aligned box from per-coordinate bounds.
    pub fn from_box(lo: &DVector<f64>, hi: &DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(SetgeomError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Ok(Self { a, b })
    }

    /// Singleton `{x}` expressed by paired inequalities.
    pub fn singleton(x: &DVector<f64>) -> Self {
        Self::from_box(x, x).expect("equal dims")
    }

    /// Halfspace `normal . x <= offset` in R^dim.
    pub fn halfspace(dim: usize, normal: &[(usize, f64)], offset: f64) -> Self {
        let mut a = DMatrix::zeros(1, dim);
        for &(i, v) in normal {
            a[(0, i)] = v;
        }
        Self {
            a,
            b: DVector::from_element(1, offset),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        let ax = &self.a * x;
        (0..self.nrows()).all(|i| ax[i] <= self.b[i] + tol)
    }

    /// Largest constraint violation at `x` (<= 0 means inside). Allocation-free
    /// so it can sit in simulation inner loops.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.nrows() {
            let mut dot = 0.0;
            for j in 0..self.a.ncols() {
                dot += self.a[(i, j)] * x[j];
            }
            worst = worst.max(dot - self.b[i]);
        }
        worst
    }

    pub fn is_empty(&self) -> bool {
        lp::feasible_point(&self.a, &self.b).is_none()
    }

    /// Any interior-ish point (Chebyshev center when the inscribed-ball LP is
    /// bounded, otherwise an arbitrary feasible point).
    pub fn center(&self) -> Option<DVector<f64>> {
        lp::chebyshev_center(&self.a, &self.b).map(|(c, _)| c)
    }

    /// Exact support function via LP. If the rows form an axis-aligned box the
    /// evaluation short-circuits to a closed form.
    pub fn support(&self, dir: &DVector<f64>) -> Support {
        debug_assert_eq!(dir.len(), self.dim());
        if let Some((lo, hi)) = self.as_box() {
            let mut rho = 0.0;
            let mut point = DVector::zeros(self.dim());
            for i in 0..self.dim() {
                if dir[i] >= 0.0 {
                    rho += dir[i] * hi[i];
                    point[i] = hi[i];
                } else {
                    rho += dir[i] * lo[i];
                    point[i] = lo[i];
                }
            }
            return Support::Value { rho, point };
        }
        match lp::solve_lp(dir, &self.a, &self.b) {
            LpResult::Optimal { value, point } => Support::Value { rho: value, point },
            LpResult::Unbounded => Support::Unbounded,
            LpResult::Infeasible => Support::Empty,
        }
    }

    /// Recognizes pure box systems: every row is a signed unit vector. Returns
    /// per-coordinate bounds (+-inf where a side is missing). Only counts as a
    /// box if every coordinate has both sides finite.
    pub fn as_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        if self.nrows() == 0 {
            return None;
        }
        let mut lo = DVector::from_element(n, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(n, f64::INFINITY);
        for i in 0..self.nrows() {
            let mut idx = None;
            for j in 0..n {
                let v = self.a[(i, j)];
                if v != 0.0 {
                    if idx.is_some() {
                        return None;
                    }
                    idx = Some((j, v));
                }
            }
            match idx {
                Some((j, v)) if v > 0.0 => hi[j] = hi[j].min(self.b[i] / v),
                Some((j, v)) => lo[j] = lo[j].max(self.b[i] / v),
                None => {
                    if self.b[i] < 0.0 {
                        return None; // trivially infeasible row; not a box
                    }
                }
            }
        }
        if (0..n).all(|j| lo[j].is_finite() && hi[j].is_finite()) {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// True when the support is finite in every signed axis direction.
    pub fn is_bounded(&self) -> bool {
        if self.as_box().is_some() {
            return true;
        }
        let n = self.dim();
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut d = DVector::zeros(n);
                d[j] = sign;
                match self.support(&d) {
                    Support::Unbounded => return false,
                    Support::Empty => return true,
                    Support::Value { .. } => {}
                }
            }
        }
        true
    }

    /// Row-concatenation intersection.
    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        if self.dim() != other.dim() {
            return Err(SetgeomError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let m = self.nrows() + other.nrows();
        let mut a = DMatrix::zeros(m, self.dim());
        let mut b = DVector::zeros(m);
        for i in 0..self.nrows() {
            a.row_mut(i).copy_from(&self.a.row(i));
            b[i] = self.b[i];
        }
        for i in 0..other.nrows() {
            a.row_mut(self.nrows() + i).copy_from(&other.a.row(i));
            b[self.nrows() + i] = other.b[i];
        }
        Ok(Polytope { a, b })
    }

    /// Adds one inequality row.
    pub fn with_row(&self, normal: &DVector<f64>, offset: f64) -> Polytope {
        let m = self.nrows();
        let mut a = DMatrix::zeros(m + 1, self.dim());
        let mut b = DVector::zeros(m + 1);
        for i in 0..m {
            a.row_mut(i).copy_from(&self.a.row(i));
            b[i] = self.b[i];
        }
        a.row_mut(m).copy_from(&normal.transpose());
        b[m] = offset;
        Polytope { a, b }
    }

    /// Preimage under the affine map `x -> M x + c`:
    /// `{x : A(Mx + c) <= b} = {x : (AM) x <= b - Ac}`.
    pub fn preimage(&self, m: &DMatrix<f64>, c: &DVector<f64>) -> Result<Polytope> {
        if m.nrows() != self.dim() {
            return Err(SetgeomError::DimensionMismatch {
                expected: self.dim(),
                got: m.nrows(),
            });
        }
        let a = &self.a * m;
        let b = &self.b - &self.a * c;
        Ok(Polytope { a, b })
    }

    /// Drops rows implied by the others and normalizes row scales. The result
    /// defines the same set. Empty input collapses to the canonical empty
    /// polytope.
    pub fn canonicalize(&self, tol: f64) -> Polytope {
        if self.nrows() == 0 {
            return self.clone();
        }
        if self.is_empty() {
            return Polytope::empty(self.dim());
        }
        // Normalize and dedupe rows first.
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for i in 0..self.nrows() {
            let norm = self.a.row(i).norm();
            if norm <= tol {
                continue; // 0 <= b with b >= 0 (nonempty checked): vacuous
            }
            let r = self.a.row(i).transpose() / norm;
            let off = self.b[i] / norm;
            let dup = rows.iter_mut().find(|(rr, _)| (rr - &r).norm() <= tol);
            match dup {
                Some((_, o)) => *o = o.min(off),
                None => rows.push((r, off)),
            }
        }
        // Remove redundant rows: row i is redundant if the maximum of its
        // lhs over the remaining rows stays below its offset.
        let mut keep = vec![true; rows.len()];
        for i in 0..rows.len() {
            let active: Vec<usize> = (0..rows.len()).filter(|&j| j != i && keep[j]).collect();
            if active.is_empty() {
                continue;
            }
            let mut a = DMatrix::zeros(active.len(), self.dim());
            let mut b = DVector::zeros(active.len());
            for (k, &j) in active.iter().enumerate() {
                a.row_mut(k).copy_from(&rows[j].0.transpose());
                b[k] = rows[j].1;
            }
            match lp::solve_lp(&rows[i].0, &a, &b) {
                LpResult::Optimal { value, .. } if value <= rows[i].1 + tol => keep[i] = false,
                _ => {}
            }
        }
        let kept: Vec<&(DVector<f64>, f64)> = rows
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(r, _)| r)
            .collect();
        if kept.is_empty() {
            return Polytope::whole_space(self.dim());
        }
        let mut order: Vec<usize> = (0..kept.len()).collect();
        order.sort_by(|&x, &y| {
            let (rx, ox) = kept[x];
            let (ry, oy) = kept[y];
            for j in 0..rx.len() {
                match rx[j].partial_cmp(&ry[j]).unwrap() {
                    std::cmp::Ordering::Equal => continue,
                    o => return o,
                }
            }
            ox.partial_cmp(oy).unwrap()
        });
        let mut a = DMatrix::zeros(kept.len(), self.dim());
        let mut b = DVector::zeros(kept.len());
        for (k, &i) in order.iter().enumerate() {
            a.row_mut(k).copy_from(&kept[i].0.transpose());
            b[k] = kept[i].1;
        }
        Polytope { a, b }
    }

    /// Equality of the *canonicalized* constraint systems, coefficients
    /// compared within `tol`.
    pub fn same_set(&self, other: &Polytope, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let p = self.canonicalize(tol);
        let q = other.canonicalize(tol);
        if p.nrows() != q.nrows() {
            return false;
        }
        for i in 0..p.nrows() {
            if (p.a.row(i) - q.a.row(i)).norm() > tol || (p.b[i] - q.b[i]).abs() > tol {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_box(n: usize) -> Polytope {
        let lo = DVector::from_element(n, -1.0);
        let hi = DVector::from_element(n, 1.0);
        Polytope::from_box(&lo, &hi).unwrap()
    }

    #[test]
    fn unit_box_support_along_axis_is_one() {
        let p = unit_box(3);
        let mut d = DVector::zeros(3);
        d[0] = 1.0;
        assert_eq!(p.support(&d).rho(), 1.0);
    }

    #[test]
    fn box_detection_and_membership() {
        let p = unit_box(2);
        let (lo, hi) = p.as_box().unwrap();
        assert_eq!(lo[0], -1.0);
        assert_eq!(hi[1], 1.0);
        assert!(p.contains(&DVector::from_row_slice(&[0.5, -0.5]), 0.0));
        assert!(!p.contains(&DVector::from_row_slice(&[1.5, 0.0]), 1e-9));
    }

    #[test]
    fn general_polytope_support_via_lp() {
        // Triangle x>=0, y>=0, x+y<=2; support in (1,1) is 2.
        let a = DMatrix::from_row_slice(3, 2, &[-1., 0., 0., -1., 1., 1.]);
        let b = DVector::from_row_slice(&[0., 0., 2.]);
        let p = Polytope::new(a, b).unwrap();
        let d = DVector::from_row_slice(&[1., 1.]);
        assert_relative_eq!(p.support(&d).rho(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn emptiness_and_whole_space() {
        assert!(Polytope::empty(2).is_empty());
        assert!(!Polytope::whole_space(2).is_empty());
        assert!(!unit_box(4).is_empty());
    }

    #[test]
    fn unbounded_direction_reported() {
        // x0 >= 0 strip.
        let p = Polytope::halfspace(2, &[(0, -1.0)], 0.0);
        let mut d = DVector::zeros(2);
        d[0] = 1.0;
        assert!(matches!(p.support(&d), Support::Unbounded));
        assert!(!p.is_bounded());
        assert!(unit_box(2).is_bounded());
    }

    #[test]
    fn intersection_of_boxes() {
        let p = unit_box(1);
        let q = Polytope::from_box(
            &DVector::from_row_slice(&[0.5]),
            &DVector::from_row_slice(&[3.0]),
        )
        .unwrap();
        let r = p.intersect(&q).unwrap();
        let d = DVector::from_row_slice(&[1.0]);
        assert_relative_eq!(r.support(&d).rho(), 1.0, epsilon = 1e-12);
        let d = DVector::from_row_slice(&[-1.0]);
        assert_relative_eq!(r.support(&d).rho(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn canonicalize_drops_redundant_rows() {
        // Unit box plus a slack row x0 <= 5.
        let p = unit_box(2).with_row(&DVector::from_row_slice(&[1., 0.]), 5.0);
        let c = p.canonicalize(1e-9);
        assert_eq!(c.nrows(), 4);
        assert!(c.same_set(&unit_box(2), 1e-9));
    }

    #[test]
    fn same_set_is_representation_independent() {
        let p = unit_box(2);
        // Same box with scaled rows and different order.
        let a = DMatrix::from_row_slice(4, 2, &[0., -2., 2., 0., 0., 2., -2., 0.]);
        let b = DVector::from_row_slice(&[2., 2., 2., 2.]);
        let q = Polytope::new(a, b).unwrap();
        assert!(p.same_set(&q, 1e-9));
        assert!(!p.same_set(&Polytope::empty(2), 1e-9));
    }

    #[test]
    fn preimage_of_shifted_interval() {
        // {y <= 1} under y = x + 3  =>  {x <= -2}.
        let p = Polytope::halfspace(1, &[(0, 1.0)], 1.0);
        let m = DMatrix::identity(1, 1);
        let c = DVector::from_row_slice(&[3.0]);
        let pre = p.preimage(&m, &c).unwrap();
        assert!(pre.contains(&DVector::from_row_slice(&[-2.0]), 1e-12));
        assert!(!pre.contains(&DVector::from_row_slice(&[-1.9]), 1e-12));
    }
}
