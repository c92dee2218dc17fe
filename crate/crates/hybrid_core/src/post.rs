//! Exact discrete-successor computation for affine edges.

use crate::automaton::{Automaton, HybridAutomaton};
use crate::error::{HybridError, Result};
use setgeom::{affine_image, Polytope};

/// Exact image of `states` through edge `edge_idx`: intersect with the source
/// invariant and guard, push through the affine reset, intersect with the
/// destination invariant. Edges with guard or reset residuals are rejected,
/// as their updates are not affine.
pub fn post_discrete_exact(
    aut: &HybridAutomaton,
    edge_idx: usize,
    states: &Polytope,
) -> Result<Polytope> {
    if edge_idx >= aut.edge_defs().len() {
        return Err(HybridError::InvalidModel(format!("edge index {edge_idx} out of range")));
    }
    let edge = aut.edge_def(edge_idx);
    if edge.guard.residual.is_some() || !edge.reset.is_affine() {
        return Err(HybridError::InvalidModel(format!(
            "edge `{}` has non-affine parts; exact post is unavailable",
            edge.label
        )));
    }
    if states.dim() != aut.dim() {
        return Err(HybridError::DimensionMismatch { expected: aut.dim(), got: states.dim() });
    }
    let mut pre = states.intersect(&edge.guard.poly)?;
    if let Some(inv) = &aut.mode_def(edge.src).invariant {
        pre = pre.intersect(inv)?;
    }
    if pre.is_empty() {
        return Ok(Polytope::empty(aut.dim()));
    }
    let (m, c) = edge.reset.to_dense();
    let mut img = affine_image(&pre, &m, &c)?;
    if let Some(inv) = &aut.mode_def(edge.dst).invariant {
        img = img.intersect(inv)?.canonicalize(1e-9);
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::EdgeDef;
    use crate::flow::{FlowSpec, SparseRow};
    use crate::guard::{Guard, Reset};
    use nalgebra::{dvector, DVector};

    fn interval(lo: f64, hi: f64) -> Polytope {
        Polytope::from_box(&dvector![lo], &dvector![hi]).unwrap()
    }

    #[test]
    fn doubling_reset_on_guard_window() {
        let mut a = HybridAutomaton::new("double", 1, vec![]).unwrap();
        let m = a.add_mode("m", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        let e = a
            .add_edge(EdgeDef {
                src: m,
                dst: m,
                guard: Guard::from_poly(interval(1.0, 2.0)),
                reset: Reset::identity(1).assign(0, SparseRow { entries: vec![(0, 2.0)], constant: 0.0 }),
                label: "dbl".into(),
                emits: vec![],
                trigger: None,
            })
            .unwrap();
        let img = post_discrete_exact(&a, e, &interval(0.0, 10.0)).unwrap();
        let (lo, hi) = img.as_box().unwrap();
        assert!((lo[0] - 2.0).abs() < 1e-9);
        assert!((hi[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn singular_stamp_reset_projects() {
        // (x, y) -> (x, x): the square collapses onto the diagonal.
        let mut a = HybridAutomaton::new("stamp", 2, vec![]).unwrap();
        let m = a.add_mode("m", FlowSpec::Constant { dim: 2 }, None).unwrap();
        let e = a
            .add_edge(EdgeDef {
                src: m,
                dst: m,
                guard: Guard::always(2),
                reset: Reset::identity(2).assign(1, SparseRow { entries: vec![(0, 1.0)], constant: 0.0 }),
                label: "stamp".into(),
                emits: vec![],
                trigger: None,
            })
            .unwrap();
        let square = Polytope::from_box(&dvector![0.0, 5.0], &dvector![1.0, 6.0]).unwrap();
        let img = post_discrete_exact(&a, e, &square).unwrap();
        assert!(img.contains(&dvector![0.5, 0.5], 1e-9));
        assert!(!img.contains(&dvector![0.5, 0.7], 1e-6));
    }

    #[test]
    fn empty_guard_intersection_gives_empty() {
        let mut a = HybridAutomaton::new("gap", 1, vec![]).unwrap();
        let m = a.add_mode("m", FlowSpec::Constant { dim: 1 }, None).unwrap();
        let e = a
            .add_edge(EdgeDef {
                src: m,
                dst: m,
                guard: Guard::from_poly(interval(5.0, 6.0)),
                reset: Reset::identity(1),
                label: "never".into(),
                emits: vec![],
                trigger: None,
            })
            .unwrap();
        let img = post_discrete_exact(&a, e, &interval(0.0, 1.0)).unwrap();
        assert!(img.is_empty());
    }

    #[test]
    fn destination_invariant_clips_image() {
        let mut a = HybridAutomaton::new("clip", 1, vec![]).unwrap();
        let src = a.add_mode("src", FlowSpec::Constant { dim: 1 }, None).unwrap();
        let dst = a
            .add_mode("dst", FlowSpec::Constant { dim: 1 }, Some(interval(0.0, 3.0)))
            .unwrap();
        let e = a
            .add_edge(EdgeDef {
                src,
                dst,
                guard: Guard::always(1),
                reset: Reset::identity(1).assign(0, SparseRow { entries: vec![(0, 2.0)], constant: 0.0 }),
                label: "dbl".into(),
                emits: vec![],
                trigger: None,
            })
            .unwrap();
        let img = post_discrete_exact(&a, e, &interval(0.0, 5.0)).unwrap();
        let hi = match img.support(&DVector::from_element(1, 1.0)) {
            setgeom::Support::Value { rho, .. } => rho,
            _ => panic!("bounded"),
        };
        assert!((hi - 3.0).abs() < 1e-9);
    }

    #[test]
    fn residual_reset_is_rejected() {
        use crate::guard::ResetResidual;
        use std::sync::Arc;
        let mut a = HybridAutomaton::new("nl", 1, vec![]).unwrap();
        let m = a.add_mode("m", FlowSpec::Constant { dim: 1 }, None).unwrap();
        let reset = Reset::identity(1).with_residual(ResetResidual {
            label: "sq".into(),
            eval: Arc::new(|x, y| y[0] = x[0] * x[0]),
            interval: Arc::new(|lo, hi| vec![(0, lo[0] * lo[0], hi[0] * hi[0])]),
        });
        let e = a
            .add_edge(EdgeDef {
                src: m,
                dst: m,
                guard: Guard::always(1),
                reset,
                label: "sq".into(),
                emits: vec![],
                trigger: None,
            })
            .unwrap();
        assert!(post_discrete_exact(&a, e, &interval(0.0, 1.0)).is_err());
    }
}
