//! Template directions and outer polyhedral hulls.

use crate::error::{Result, SetgeomError};
use crate::polytope::Polytope;
use crate::support::SupportSet;
use nalgebra::{DMatrix, DVector};

/// A finite fan of outer-approximation directions.
#[derive(Debug, Clone)]
pub struct TemplateDirections {
    dirs: Vec<DVector<f64>>,
    dim: usize,
}

impl TemplateDirections {
    /// The 2n signed axis directions.
    pub fn box_dirs(dim: usize) -> Self {
        let mut dirs = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut d = DVector::zeros(dim);
                d[i] = sign;
                dirs.push(d);
            }
        }
        Self { dirs, dim }
    }

    /// Axis directions plus all normalized two-coordinate diagonals
    /// (2n^2 directions total). Intended for low dimensions; above dimension
    /// four the box template is the better default.
    pub fn octagonal(dim: usize) -> Self {
        let mut t = Self::box_dirs(dim);
        let inv = 1.0 / 2.0_f64.sqrt();
        for i in 0..dim {
            for j in (i + 1)..dim {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut d = DVector::zeros(dim);
                    d[i] = si * inv;
                    d[j] = sj * inv;
                    t.dirs.push(d);
                }
            }
        }
        t
    }

    pub fn custom(dirs: Vec<DVector<f64>>) -> Result<Self> {
        let dim = dirs
            .first()
            .map(|d| d.len())
            .ok_or_else(|| SetgeomError::InvalidParameter("no directions given".into()))?;
        if dirs.iter().any(|d| d.len() != dim) {
            return Err(SetgeomError::DimensionMismatch { expected: dim, got: 0 });
        }
        Ok(Self { dirs, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn directions(&self) -> &[DVector<f64>] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Tightest template polyhedron containing `s`:
/// rows `d . x <= rho(d, s)` for each template direction. Directions with
/// unbounded support are dropped (the hull stays sound, just unbounded there).
/// An empty set collapses to the canonical empty polytope.
pub fn template_hull(s: &SupportSet, v: &TemplateDirections) -> Polytope {
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for d in v.directions() {
        let rho = s.support(d);
        if rho == f64::NEG_INFINITY {
            return Polytope::empty(v.dim());
        }
        if rho.is_finite() {
            rows.push(d.clone());
            offs.push(rho);
        }
    }
    if rows.is_empty() {
        return Polytope::whole_space(v.dim());
    }
    let mut a = DMatrix::zeros(rows.len(), v.dim());
    for (i, r) in rows.iter().enumerate() {
        a.row_mut(i).copy_from(&r.transpose());
    }
    Polytope::new(a, DVector::from_vec(offs)).expect("consistent dims")
}

/// Symmetric interval hull: the box `prod_i [-m_i, m_i]` with
/// `m_i = max |x_i|` over the set. Errors if the set is unbounded in some
/// axis direction; an empty set yields the origin.
pub fn box_hull(s: &SupportSet) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = s.dim();
    let mut m = DVector::zeros(n);
    for i in 0..n {
        let mut d = DVector::zeros(n);
        d[i] = 1.0;
        let hi = s.support(&d);
        d[i] = -1.0;
        let lo = s.support(&d);
        if hi == f64::INFINITY || lo == f64::INFINITY {
            return Err(SetgeomError::Unbounded {
                dir: d.iter().copied().collect(),
            });
        }
        if hi == f64::NEG_INFINITY {
            return Ok((DVector::zeros(n), DVector::zeros(n)));
        }
        m[i] = hi.abs().max(lo.abs());
    }
    Ok((-m.clone(), m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dirv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn octagonal_direction_count() {
        assert_eq!(TemplateDirections::box_dirs(3).len(), 6);
        assert_eq!(TemplateDirections::octagonal(2).len(), 8);
        assert_eq!(TemplateDirections::octagonal(4).len(), 32);
    }

    #[test]
    fn box_template_of_rotated_box_is_bounding_box() {
        // 45-degree rotated unit box: bounding box [-sqrt2, sqrt2]^2.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let rot = DMatrix::from_row_slice(2, 2, &[r, -r, r, r]);
        let s = SupportSet::linear(
            rot,
            SupportSet::Box(dirv(&[-1., -1.]), dirv(&[1., 1.])),
        );
        let h = template_hull(&s, &TemplateDirections::box_dirs(2));
        let (lo, hi) = h.as_box().unwrap();
        let s2 = 2.0_f64.sqrt();
        assert_relative_eq!(hi[0], s2, epsilon = 1e-12);
        assert_relative_eq!(lo[1], -s2, epsilon = 1e-12);
    }

    #[test]
    fn template_hull_is_idempotent_on_template_polyhedra() {
        let v = TemplateDirections::octagonal(2);
        let s = SupportSet::Box(dirv(&[-1., -2.]), dirv(&[1., 0.5]));
        let h1 = template_hull(&s, &v);
        let h2 = template_hull(&SupportSet::poly(h1.clone()), &v);
        assert!(h1.same_set(&h2, 1e-9));
    }

    #[test]
    fn hull_of_empty_is_empty() {
        let v = TemplateDirections::box_dirs(2);
        let h = template_hull(&SupportSet::poly(Polytope::empty(2)), &v);
        assert!(h.is_empty());
    }

    #[test]
    fn box_hull_is_symmetric() {
        // Box [1,2] x [-3,0.5]: symmetric hull [-2,2] x [-3,3].
        let s = SupportSet::Box(dirv(&[1., -3.]), dirv(&[2., 0.5]));
        let (lo, hi) = box_hull(&s).unwrap();
        assert_relative_eq!(hi[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(lo[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(hi[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn box_hull_rejects_unbounded() {
        let s = SupportSet::poly(Polytope::halfspace(2, &[(0, 1.0)], 1.0));
        assert!(box_hull(&s).is_err());
    }
}
