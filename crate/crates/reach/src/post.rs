//! Over-approximate Post operators on lists of (mode, set) blocks: time
//! elapse via flowpipe sections and autonomous discrete jumps via guarded
//! affine images. Both are the operators partition refinement splits
//! against, so every result must contain the exact successors.

use crate::config::{ReachConfig, TemplateChoice};
use crate::cont::{poly_box, reach_cont};
use crate::error::{ReachError, Result};
use hybrid_core::{Automaton, EdgeInstance, ModeKey};
use nalgebra::DVector;
use setgeom::{discrete_post_over, Polytope, SupportSet};

/// Union of flowpipe sections per block: everything reachable by letting
/// time pass inside the block's mode, for up to `cfg.horizon`. Output order
/// follows the input blocks, sections in step order.
pub fn post_tau_over(
    aut: &dyn Automaton,
    blocks: &[(ModeKey, Polytope)],
    cfg: &ReachConfig,
) -> Result<Vec<(ModeKey, Polytope)>> {
    let mut out = Vec::new();
    for (mode, set) in blocks {
        let pipe = reach_cont(aut, mode, set, cfg)?;
        for s in pipe.segments {
            out.push((mode.clone(), s.set));
        }
    }
    Ok(out)
}

/// Image of one autonomous edge on one set, hulled in `v` and clipped by the
/// destination invariant. `None` when the guard cuts the set to nothing.
/// Edges waiting on an external trigger have no autonomous successors.
pub fn post_edge_over_one(
    aut: &dyn Automaton,
    mode: &ModeKey,
    edge: &EdgeInstance,
    x: &Polytope,
    v: &TemplateChoice,
) -> Result<Option<(ModeKey, Polytope)>> {
    if edge.trigger.is_some() {
        return Ok(None);
    }
    if edge.parts.len() != 1 || edge.parts[0].condition.is_some() {
        return Err(ReachError::UnsupportedFlow(format!(
            "edge `{}` has conditional jump parts; resolve participation first",
            edge.label
        )));
    }
    let part = &edge.parts[0];
    let dirs = v.directions(x.dim())?;
    let dst = edge.dst_mode_full(mode);
    let dst_inv = aut.invariant(&dst);

    let cut = x.intersect(&edge.guard.poly)?;
    if cut.is_empty() {
        return Ok(None);
    }
    let (m, c) = part.reset.to_dense();
    let img = discrete_post_over(
        &SupportSet::poly(cut.clone()),
        &Polytope::whole_space(x.dim()),
        &m,
        &c,
        dst_inv.as_ref(),
        &dirs,
    )?;
    if img.is_empty() {
        return Ok(None);
    }

    let img = match &part.reset.residual {
        None => img,
        Some(res) => {
            // The residual overwrites some coordinates after the affine
            // rows. Faces that touch an overwritten coordinate no longer
            // constrain the image; keep the others and add the residual's
            // interval bounds computed from the pre-state box.
            let (plo, phi) = poly_box(&cut)?;
            let writes = (res.interval)(&plo, &phi);
            let written: Vec<usize> = writes.iter().map(|w| w.0).collect();
            let a = img.a();
            let b = img.b();
            let mut keep_rows = Vec::new();
            let mut keep_offs = Vec::new();
            for r in 0..a.nrows() {
                if written.iter().all(|&w| a[(r, w)] == 0.0) {
                    keep_rows.push(a.row(r).into_owned());
                    keep_offs.push(b[r]);
                }
            }
            let mut out = if keep_rows.is_empty() {
                Polytope::whole_space(x.dim())
            } else {
                let mut am = nalgebra::DMatrix::zeros(keep_rows.len(), x.dim());
                for (i, row) in keep_rows.iter().enumerate() {
                    am.row_mut(i).copy_from(row);
                }
                Polytope::new(am, DVector::from_vec(keep_offs))?
            };
            for (coord, wlo, whi) in writes {
                out = out
                    .with_row(&unit(x.dim(), coord, 1.0), whi)
                    .with_row(&unit(x.dim(), coord, -1.0), -wlo);
            }
            match dst_inv.as_ref() {
                Some(inv) => out.intersect(inv)?,
                None => out,
            }
        }
    };
    if img.is_empty() {
        return Ok(None);
    }
    Ok(Some((dst, img)))
}

fn unit(n: usize, i: usize, s: f64) -> DVector<f64> {
    let mut d = DVector::zeros(n);
    d[i] = s;
    d
}

/// All autonomous jump successors of the blocks, one entry per (block, edge)
/// pair with a nonempty image.
pub fn post_edge_over(
    aut: &dyn Automaton,
    blocks: &[(ModeKey, Polytope)],
    v: &TemplateChoice,
) -> Result<Vec<(ModeKey, Polytope)>> {
    let mut out = Vec::new();
    for (mode, set) in blocks {
        for edge in aut.edges_from(mode) {
            if let Some(hit) = post_edge_over_one(aut, mode, &edge, set, v)? {
                out.push(hit);
            }
        }
    }
    Ok(out)
}
