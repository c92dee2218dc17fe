//! Euclidean distance between convex polytopes.
//!
//! `d(P, Q) = min ||p - q||` is the norm of the minimum-norm point of the
//! Minkowski difference `P (+) (-Q)`, computed by Wolfe's algorithm: keep a
//! small affinely independent corral of difference vertices, take the
//! min-norm point of its convex hull, and ask the LP support oracle for a
//! vertex that improves it. On polytopes the oracle returns vertices of a
//! finite set, so the loop terminates at the exact minimizer (up to solver
//! roundoff).

use crate::error::{Result, SetgeomError};
use crate::polytope::{Polytope, Support};
use nalgebra::{DMatrix, DVector};

const GAP_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;

/// Distance between two nonempty polytopes (0 if they intersect), plus a
/// realizing pair of points.
pub fn poly_distance_pair(p: &Polytope, q: &Polytope) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    if p.dim() != q.dim() {
        return Err(SetgeomError::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    // Support oracle of M = P (+) (-Q): maximizer of d.(p - q).
    let oracle = |d: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        let sp = match p.support(d) {
            Support::Value { point, .. } => point,
            Support::Unbounded => {
                return Err(SetgeomError::Unbounded {
                    dir: d.iter().copied().collect(),
                })
            }
            Support::Empty => return Err(SetgeomError::EmptyPolytope),
        };
        let sq = match q.support(&(-d)) {
            Support::Value { point, .. } => point,
            Support::Unbounded => {
                return Err(SetgeomError::Unbounded {
                    dir: (-d).iter().copied().collect(),
                })
            }
            Support::Empty => return Err(SetgeomError::EmptyPolytope),
        };
        Ok((sp, sq))
    };

    let n = p.dim();
    let start_dir = DVector::from_element(n, 1.0);
    let (p0, q0) = oracle(&start_dir)?;
    // Corral of (difference point, p-part, q-part) with convex weights.
    let mut pts: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)> =
        vec![(&p0 - &q0, p0, q0)];
    let mut w = vec![1.0f64];
    let mut v = pts[0].0.clone();

    let max_outer = 60 + 20 * n;
    for _ in 0..max_outer {
        let vv = v.dot(&v);
        if vv <= GAP_TOL {
            break; // sets overlap
        }
        let (sp, sq) = oracle(&(-v.clone()))?;
        let m = &sp - &sq;
        // Frank-Wolfe gap: if no difference vertex improves on v, v is the
        // minimum-norm point.
        if vv - v.dot(&m) <= GAP_TOL * vv.max(1.0) {
            break;
        }
        if pts.iter().any(|(d, _, _)| (d - &m).norm() <= 1e-12) {
            break; // oracle repeated a corral point; no further progress
        }
        pts.push((m, sp, sq));
        w.push(0.0);
        min_norm_point(&mut pts, &mut w, &mut v);
    }

    let mut pp = DVector::zeros(n);
    let mut qq = DVector::zeros(n);
    for (wi, (_, pi, qi)) in w.iter().zip(&pts) {
        pp += pi * *wi;
        qq += qi * *wi;
    }
    let d = v.norm();
    Ok((if d <= 1e-9 { 0.0 } else { d }, pp, qq))
}

/// Distance only. See [`poly_distance_pair`].
pub fn poly_distance(p: &Polytope, q: &Polytope) -> Result<f64> {
    poly_distance_pair(p, q).map(|(d, _, _)| d)
}

/// Wolfe's minor cycle: replaces `w` with the weights of the minimum-norm
/// point of `conv(pts)` and drops points whose weight hits zero. `v` is set
/// to the new point.
fn min_norm_point(
    pts: &mut Vec<(DVector<f64>, DVector<f64>, DVector<f64>)>,
    w: &mut Vec<f64>,
    v: &mut DVector<f64>,
) {
    for _ in 0..200 {
        let k = pts.len();
        // Affine minimizer over current corral: solve
        // [G 1; 1^T 0][alpha; mu] = [0; 1] with G the Gram matrix.
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        for i in 0..k {
            for j in 0..k {
                kkt[(i, j)] = pts[i].0.dot(&pts[j].0);
            }
            kkt[(i, k)] = 1.0;
            kkt[(k, i)] = 1.0;
        }
        // Tiny ridge keeps degenerate corrals solvable without moving the
        // optimum past the weight tolerance.
        for i in 0..k {
            kkt[(i, i)] += 1e-13;
        }
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let alpha = match kkt.lu().solve(&rhs) {
            Some(sol) => DVector::from_fn(k, |i, _| sol[i]),
            None => break,
        };
        if alpha.iter().all(|&a| a >= -WEIGHT_TOL) {
            for i in 0..k {
                w[i] = alpha[i].max(0.0);
            }
            normalize(w);
            break;
        }
        // Step from w toward alpha until the first weight hits zero.
        let mut theta = 1.0f64;
        for i in 0..k {
            if alpha[i] < WEIGHT_TOL && w[i] > alpha[i] {
                theta = theta.min(w[i] / (w[i] - alpha[i]));
            }
        }
        for i in 0..k {
            w[i] += theta * (alpha[i] - w[i]);
            if w[i] < WEIGHT_TOL {
                w[i] = 0.0;
            }
        }
        normalize(w);
        let mut i = 0;
        while i < pts.len() {
            if w[i] == 0.0 && pts.len() > 1 {
                pts.remove(i);
                w.remove(i);
            } else {
                i += 1;
            }
        }
    }
    let n = v.len();
    *v = DVector::zeros(n);
    for (wi, (d, _, _)) in w.iter().zip(pts.iter()) {
        *v += d * *wi;
    }
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        for x in w.iter_mut() {
            *x /= s;
        }
    }
}
