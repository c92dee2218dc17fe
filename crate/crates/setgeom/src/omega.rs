//! Single-step over-approximation of linear flows and the discrete-jump
//! post operator on template sets.

use crate::error::Result;
use crate::matexp::{abs_matrix, mat_exp, phi2};
use crate::polytope::Polytope;
use crate::support::SupportSet;
use crate::template::{box_hull, template_hull, TemplateDirections};
use nalgebra::{DMatrix, DVector};

/// Interpolated step set for the flow `x' = Ax` over `[0, delta]`:
///
/// `Omega_lambda(X) = (1-l) X  (+)  l e^{dA} X  (+)  (l E+  inter  (1-l) E-)`
///
/// where the error boxes are
/// `E+ = box(Phi2(|A|, d) * box(A^2 X))` and
/// `E- = box(Phi2(|A|, d) * box(A^2 e^{dA} X))`.
///
/// For every `x in X` and `l in [0,1]`, `e^{l d A} x` lies in
/// `Omega_lambda(X)`; at `l = 0` and `l = 1` the set reproduces `X` and
/// `e^{dA} X` exactly on every direction. The `|A|` inside `Phi2` is the
/// entrywise absolute value: the term-by-term triangle inequality that proves
/// the containment needs it, and the signed variant can undershoot on
/// sign-mixing matrices.
pub fn omega(x: &SupportSet, a: &DMatrix<f64>, delta: f64, lambda: f64) -> Result<SupportSet> {
    let ed = mat_exp(a, delta)?;
    omega_with_exp(x, a, &ed, delta, lambda)
}

/// Same as [`omega`], reusing a precomputed `e^{dA}`.
pub fn omega_with_exp(
    x: &SupportSet,
    a: &DMatrix<f64>,
    ed: &DMatrix<f64>,
    delta: f64,
    lambda: f64,
) -> Result<SupportSet> {
    let l = lambda.clamp(0.0, 1.0);
    let a2 = a * a;
    let phi = phi2(&abs_matrix(a), delta)?;

    let err_box = |inner: SupportSet| -> Result<SupportSet> {
        // box(Phi2 * box(A^2 inner)); both hulls are symmetric boxes, so the
        // support of the image has the closed form sum_j |(Phi2^T d)_j| m_j,
        // which Linear+Box composes to exactly.
        let (_, m) = box_hull(&SupportSet::linear(a2.clone(), inner))?;
        let image = SupportSet::linear(phi.clone(), SupportSet::Box(-m.clone(), m));
        let (_, r) = box_hull(&image)?;
        Ok(SupportSet::Box(-r.clone(), r))
    };

    let e_plus = err_box(x.clone())?;
    let e_minus = err_box(SupportSet::linear(ed.clone(), x.clone()))?;

    let parts = vec![
        SupportSet::scale(1.0 - l, x.clone())?,
        SupportSet::scale(l, SupportSet::linear(ed.clone(), x.clone()))?,
        SupportSet::Inter(vec![
            SupportSet::scale(l, e_plus)?,
            SupportSet::scale(1.0 - l, e_minus)?,
        ]),
    ];
    Ok(SupportSet::Sum(parts))
}

/// Over-approximate image of a discrete edge on a template set:
/// hull the state, cut by the guard, push through the affine reset, hull
/// again and clip by the destination invariant. Returns the canonical empty
/// polytope when the guard cut is empty.
pub fn discrete_post_over(
    x: &SupportSet,
    guard: &Polytope,
    reset_m: &DMatrix<f64>,
    reset_c: &DVector<f64>,
    dst_invariant: Option<&Polytope>,
    v: &TemplateDirections,
) -> Result<Polytope> {
    let hull = template_hull(x, v);
    let cut = hull.intersect(guard)?;
    if cut.is_empty() {
        return Ok(Polytope::empty(v.dim()));
    }
    let image = SupportSet::linear(reset_m.clone(), SupportSet::poly(cut)).translate(reset_c);
    let out = template_hull(&image, v);
    match dst_invariant {
        Some(inv) => Ok(out.intersect(inv)?),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_row_slice(&[x, y])
    }

    #[test]
    fn omega_of_static_flow_is_the_set() {
        // A = 0: Omega_lambda(X) = X for every lambda.
        let x = SupportSet::Box(vec2(-1.0, 0.0), vec2(1.0, 2.0));
        let a = DMatrix::zeros(2, 2);
        for l in [0.0, 0.25, 0.5, 1.0] {
            let o = omega(&x, &a, 0.5, l).unwrap();
            for d in TemplateDirections::octagonal(2).directions() {
                assert_relative_eq!(o.support(d), x.support(d), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn omega_lambda_zero_reproduces_x() {
        let x = SupportSet::Box(vec2(0.5, -0.5), vec2(1.5, 0.5));
        let a = DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.]);
        let o = omega(&x, &a, 0.3, 0.0).unwrap();
        for d in TemplateDirections::octagonal(2).directions() {
            assert_relative_eq!(o.support(d), x.support(d), epsilon = 1e-12);
        }
    }

    #[test]
    fn omega_lambda_one_is_exact_image() {
        let x = SupportSet::Box(vec2(0.5, -0.5), vec2(1.5, 0.5));
        let a = DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.]);
        let delta = 0.3;
        let ed = mat_exp(&a, delta).unwrap();
        let o = omega(&x, &a, delta, 1.0).unwrap();
        let image = SupportSet::linear(ed, x);
        for d in TemplateDirections::octagonal(2).directions() {
            assert_relative_eq!(o.support(d), image.support(d), epsilon = 1e-12);
        }
    }

    #[test]
    fn omega_contains_interpolated_rotation_points() {
        // Rotation flow; check e^{l d A} x0 stays inside for sampled x0, l.
        let a = DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.]);
        let delta = 0.4;
        let x = SupportSet::Box(vec2(0.8, -0.2), vec2(1.2, 0.2));
        let v = TemplateDirections::octagonal(2);
        for &l in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let o = omega(&x, &a, delta, l).unwrap();
            let el = mat_exp(&a, l * delta).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    let x0 = vec2(0.8 + 0.1 * i as f64, -0.2 + 0.1 * j as f64);
                    let y = &el * &x0;
                    for d in v.directions() {
                        assert!(
                            d.dot(&y) <= o.support(d) + 1e-9,
                            "violation at l={l}, point {x0:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn discrete_post_identity_reset_is_guard_cut() {
        // X = [0,2], guard x >= 1, identity reset: post = [1,2].
        let x = SupportSet::Box(
            DVector::from_row_slice(&[0.0]),
            DVector::from_row_slice(&[2.0]),
        );
        let guard = Polytope::halfspace(1, &[(0, -1.0)], -1.0);
        let v = TemplateDirections::box_dirs(1);
        let p = discrete_post_over(
            &x,
            &guard,
            &DMatrix::identity(1, 1),
            &DVector::zeros(1),
            None,
            &v,
        )
        .unwrap();
        let (lo, hi) = p.as_box().unwrap();
        assert_relative_eq!(lo[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(hi[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn discrete_post_applies_reset_and_invariant() {
        // X = [0,2], guard x >= 1, reset x -> x + 10, invariant x <= 11.5.
        let x = SupportSet::Box(
            DVector::from_row_slice(&[0.0]),
            DVector::from_row_slice(&[2.0]),
        );
        let guard = Polytope::halfspace(1, &[(0, -1.0)], -1.0);
        let inv = Polytope::halfspace(1, &[(0, 1.0)], 11.5);
        let v = TemplateDirections::box_dirs(1);
        let p = discrete_post_over(
            &x,
            &guard,
            &DMatrix::identity(1, 1),
            &DVector::from_row_slice(&[10.0]),
            Some(&inv),
            &v,
        )
        .unwrap();
        let d = DVector::from_row_slice(&[1.0]);
        assert_relative_eq!(p.support(&d).rho(), 11.5, epsilon = 1e-12);
        let d = DVector::from_row_slice(&[-1.0]);
        assert_relative_eq!(p.support(&d).rho(), -11.0, epsilon = 1e-12);
    }

    #[test]
    fn discrete_post_empty_guard_cut() {
        let x = SupportSet::Box(
            DVector::from_row_slice(&[0.0]),
            DVector::from_row_slice(&[0.5]),
        );
        let guard = Polytope::halfspace(1, &[(0, -1.0)], -1.0); // x >= 1
        let v = TemplateDirections::box_dirs(1);
        let p = discrete_post_over(
            &x,
            &guard,
            &DMatrix::identity(1, 1),
            &DVector::zeros(1),
            None,
            &v,
        )
        .unwrap();
        assert!(p.is_empty());
    }
}
