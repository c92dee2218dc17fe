//! Deterministic sampling of points from polytopes (test oracles and
//! certificate spot-checks).

use crate::polytope::Polytope;
use nalgebra::DVector;
use rand::Rng;

/// Draws `count` points from a nonempty polytope. Boxes sample uniformly per
/// coordinate; general polytopes run a short hit-and-run walk from the
/// Chebyshev center (exactness is not needed by callers, membership is —
/// every returned point satisfies the constraints).
pub fn sample_polytope<R: Rng>(rng: &mut R, p: &Polytope, count: usize) -> Vec<DVector<f64>> {
    if let Some((lo, hi)) = p.as_box() {
        return (0..count)
            .map(|_| {
                DVector::from_fn(p.dim(), |i, _| {
                    if hi[i] > lo[i] {
                        rng.gen_range(lo[i]..=hi[i])
                    } else {
                        lo[i]
                    }
                })
            })
            .collect();
    }
    let Some(center) = p.center() else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(count);
    let mut x = center;
    for _ in 0..count {
        for _ in 0..8 {
            x = hit_and_run_step(rng, p, &x);
        }
        out.push(x.clone());
    }
    out
}

fn hit_and_run_step<R: Rng>(rng: &mut R, p: &Polytope, x: &DVector<f64>) -> DVector<f64> {
    let n = p.dim();
    let mut d = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let norm = d.norm();
    if norm < 1e-12 {
        return x.clone();
    }
    d /= norm;
    // Feasible chord: a.(x + t d) <= b for all rows.
    let mut t_lo = -1e9f64;
    let mut t_hi = 1e9f64;
    let ax = p.a() * x;
    let ad = p.a() * &d;
    for i in 0..p.nrows() {
        let slack = p.b()[i] - ax[i];
        if ad[i] > 1e-12 {
            t_hi = t_hi.min(slack / ad[i]);
        } else if ad[i] < -1e-12 {
            t_lo = t_lo.max(slack / ad[i]);
        } else if slack < -1e-9 {
            return x.clone();
        }
    }
    if t_lo > t_hi {
        return x.clone();
    }
    let t = rng.gen_range(t_lo.min(0.0)..=t_hi.max(0.0));
    x + d * t
}
