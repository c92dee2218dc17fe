//! Flowpipe computation. Two engines share the section contract:
//!
//! * a support-function engine for affine flows, stepping
//!   `X_{k+1} = hull_V(e^{dA} X_k + drift)` with per-step tube sets hulled
//!   over the lambda grid of interpolated step sets;
//! * an interval engine for box templates and for flows with clamped-decay
//!   coordinates, stepping midpoint/radius boxes through the exact affine
//!   step map with a certified enclosure and a chord curvature bound for
//!   the tube.
//!
//! The interval engine also takes over plain affine flows in high dimension
//! when only box faces are requested; the support recipe is kept for every
//! low-dimensional or non-box run.

use crate::config::{ReachConfig, TemplateChoice};
use crate::error::{ReachError, Result};
use crate::flowpipe::{Flowpipe, Section};
use hybrid_core::{Automaton, DecayRow, FlowSpec, ModeKey, SparseRow};
use nalgebra::{DMatrix, DVector};
use setgeom::{mat_exp, omega_with_exp, template_hull, Polytope, Support, SupportSet};

/// Dimension above which box-template affine runs switch to the interval
/// engine.
const BOX_FAST_PATH_DIM: usize = 13;
const MAX_STEPS: usize = 400_000;
const TIME_EPS: f64 = 1e-12;

/// Axis-aligned bounding box of a polytope, via supports when it is not
/// already a box.
pub fn poly_box(p: &Polytope) -> Result<(DVector<f64>, DVector<f64>)> {
    if let Some(bx) = p.as_box() {
        return Ok(bx);
    }
    let n = p.dim();
    let mut lo = DVector::zeros(n);
    let mut hi = DVector::zeros(n);
    let mut d = DVector::zeros(n);
    for i in 0..n {
        d[i] = 1.0;
        match p.support(&d) {
            Support::Value { rho, .. } => hi[i] = rho,
            Support::Unbounded => return Err(ReachError::UnboundedInitial),
            Support::Empty => return Err(ReachError::EmptyInitial),
        }
        d[i] = -1.0;
        match p.support(&d) {
            Support::Value { rho, .. } => lo[i] = -rho,
            Support::Unbounded => return Err(ReachError::UnboundedInitial),
            Support::Empty => return Err(ReachError::EmptyInitial),
        }
        d[i] = 0.0;
    }
    Ok((lo, hi))
}

/// One interval-arithmetic tightening sweep of a box against linear rows.
/// Returns `None` only when the intersection is certainly empty.
fn icp_clip(
    lo: &mut DVector<f64>,
    hi: &mut DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Option<()> {
    for _ in 0..2 {
        for r in 0..a.nrows() {
            let mut min_sum = 0.0;
            for j in 0..a.ncols() {
                let c = a[(r, j)];
                min_sum += if c >= 0.0 { c * lo[j] } else { c * hi[j] };
            }
            if min_sum > b[r] + 1e-9 {
                return None;
            }
            for j in 0..a.ncols() {
                let c = a[(r, j)];
                if c == 0.0 {
                    continue;
                }
                let own_min = if c >= 0.0 { c * lo[j] } else { c * hi[j] };
                let slack = b[r] - (min_sum - own_min);
                if c > 0.0 {
                    hi[j] = hi[j].min(slack / c);
                } else {
                    lo[j] = lo[j].max(slack / c);
                }
                if lo[j] > hi[j] + 1e-9 {
                    return None;
                }
            }
        }
    }
    Some(())
}

struct StepOutcome {
    sections: Vec<Section>,
    truncated: bool,
}

/// Affine flow as a dense matrix pair plus decay rows, the common input of
/// the interval engine.
struct SplitFlow {
    rows: Vec<SparseRow>,
    decays: Vec<DecayRow>,
}

fn split_flow(flow: &FlowSpec) -> Result<SplitFlow> {
    let n = flow.dim();
    let rows = match flow {
        FlowSpec::LinearOde { a, b } => (0..n)
            .map(|i| SparseRow {
                entries: (0..n).filter(|&j| a[(i, j)] != 0.0).map(|j| (j, a[(i, j)])).collect(),
                constant: b[i],
            })
            .collect(),
        FlowSpec::Clock { rates } => rates.iter().map(|&r| SparseRow::constant(r)).collect(),
        FlowSpec::Constant { dim } => vec![SparseRow::constant(0.0); *dim],
        FlowSpec::ThresholdDecay { rates, .. } => {
            rates.iter().map(|&r| SparseRow::constant(r)).collect()
        }
        FlowSpec::Sparse(sf) => sf.rows.clone(),
    };
    let decays = match flow {
        FlowSpec::ThresholdDecay { decay, .. } => vec![decay.clone()],
        FlowSpec::Sparse(sf) => sf.decays.clone(),
        _ => Vec::new(),
    };
    Ok(SplitFlow { rows, decays })
}

/// Compute the flowpipe sections of one flow under one invariant.
pub fn reach_flow(
    flow: &FlowSpec,
    invariant: Option<&Polytope>,
    x0: &Polytope,
    cfg: &ReachConfig,
) -> Result<(Vec<Section>, bool)> {
    cfg.validate()?;
    flow.validate()?;
    let n = flow.dim();
    if x0.dim() != n {
        return Err(ReachError::BadConfig(format!(
            "initial set dimension {} does not match flow dimension {}",
            x0.dim(),
            n
        )));
    }
    let x0 = match invariant {
        Some(inv) => x0.intersect(inv)?,
        None => x0.clone(),
    };
    if x0.is_empty() {
        return Err(ReachError::EmptyInitial);
    }
    let steps = (cfg.horizon / cfg.delta).ceil() as usize;
    if steps > MAX_STEPS {
        return Err(ReachError::BadConfig(format!(
            "horizon/delta implies {steps} steps (cap {MAX_STEPS})"
        )));
    }

    let has_decay = !matches!(
        flow,
        FlowSpec::LinearOde { .. } | FlowSpec::Clock { .. } | FlowSpec::Constant { .. }
    ) && flow.as_affine().is_none();
    let use_interval = has_decay
        || (matches!(cfg.templates, TemplateChoice::Box) && n >= BOX_FAST_PATH_DIM);

    let out = if use_interval {
        if !matches!(cfg.templates, TemplateChoice::Box) {
            return Err(ReachError::UnsupportedFlow(
                "flows with decay coordinates support box templates only".into(),
            ));
        }
        let sf = split_flow(flow)?;
        reach_interval(&sf, invariant, &x0, cfg)?
    } else {
        let (a, b) = flow.as_affine().ok_or_else(|| {
            ReachError::UnsupportedFlow("support engine needs an affine flow".into())
        })?;
        reach_support(&a, &b, invariant, &x0, cfg)?
    };
    Ok((out.sections, out.truncated))
}

/// Flowpipe of `mode` of `aut` from `x0`.
pub fn reach_cont(
    aut: &dyn Automaton,
    mode: &ModeKey,
    x0: &Polytope,
    cfg: &ReachConfig,
) -> Result<Flowpipe> {
    let flow = aut.flow(mode);
    let inv = aut.invariant(mode);
    let (segments, truncated) = reach_flow(&flow, inv.as_ref(), x0, cfg)?;
    Ok(Flowpipe { mode: mode.clone(), eps: cfg.eps, segments, truncated })
}

fn embed_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
    }
    m
}

fn reach_support(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    invariant: Option<&Polytope>,
    x0: &Polytope,
    cfg: &ReachConfig,
) -> Result<StepOutcome> {
    let n = a.nrows();
    poly_box(x0)?;
    let v = cfg.templates.directions(n)?;

    // Augmented system z = (x, 1): z' = [[A, b], [0, 0]] z. Its trajectories
    // restricted to the first n coordinates are exactly the affine flow, so
    // the interpolated step sets of the augmented linear system cover the
    // affine tube.
    let mut a_hat = DMatrix::zeros(n + 1, n + 1);
    a_hat.view_mut((0, 0), (n, n)).copy_from(a);
    a_hat.view_mut((0, n), (n, 1)).copy_from(&DMatrix::from_column_slice(n, 1, b.as_slice()));
    let embed = embed_matrix(n);
    let e_z = {
        let mut z = DVector::zeros(n + 1);
        z[n] = 1.0;
        z
    };

    let ed_full = mat_exp(&a_hat, cfg.delta)?;
    let step_map = |ed: &DMatrix<f64>| -> (DMatrix<f64>, DVector<f64>) {
        let e = ed.view((0, 0), (n, n)).into_owned();
        let f = ed.view((0, n), (n, 1)).column(0).into_owned();
        (e, f)
    };
    let (e_lin, e_aff) = step_map(&ed_full);

    let mut sections = Vec::new();
    let mut truncated = false;
    let mut x_k = x0.clone();
    let mut k = 0usize;
    loop {
        let t_lo = k as f64 * cfg.delta;
        if t_lo >= cfg.horizon - TIME_EPS || k >= MAX_STEPS {
            break;
        }
        let dt = cfg.delta.min(cfg.horizon - t_lo);
        let partial = dt < cfg.delta - TIME_EPS;
        let (ed_k, e_k, f_k) = if partial {
            let ed = mat_exp(&a_hat, dt)?;
            let (e, f) = step_map(&ed);
            (ed, e, f)
        } else {
            (ed_full.clone(), e_lin.clone(), e_aff.clone())
        };

        let x_hat = SupportSet::Sum(vec![
            SupportSet::linear(embed.clone(), SupportSet::poly(x_k.clone())),
            SupportSet::point(e_z.clone()),
        ]);
        let mut tube = Vec::new();
        for &l in &cfg.lambda_grid {
            tube.push(omega_with_exp(&x_hat, &a_hat, &ed_k, dt, l)?);
        }
        let tube = SupportSet::Hull(tube);

        let mut rows = DMatrix::zeros(v.len(), n);
        let mut offs = DVector::zeros(v.len());
        let mut finite = true;
        for (i, d) in v.directions().iter().enumerate() {
            let mut d_hat = DVector::zeros(n + 1);
            d_hat.rows_mut(0, n).copy_from(d);
            let rho = tube.support(&d_hat);
            if !rho.is_finite() {
                finite = false;
                break;
            }
            rows.row_mut(i).copy_from(&d.transpose());
            offs[i] = rho + cfg.eps * d.norm();
        }
        if !finite {
            truncated = true;
            break;
        }
        let mut section = Polytope::new(rows, offs)?;
        if let Some(inv) = invariant {
            section = section.intersect(inv)?;
        }
        if section.is_empty() {
            break;
        }
        sections.push(Section { k, t_lo, t_hi: t_lo + dt, set: section });

        let image = SupportSet::linear(e_k, SupportSet::poly(x_k.clone())).translate(&f_k);
        let mut next = template_hull(&image, &v);
        if next.b().iter().any(|x| !x.is_finite()) {
            truncated = true;
            break;
        }
        if let Some(inv) = invariant {
            next = next.intersect(inv)?;
        }
        if next.is_empty() {
            break;
        }
        x_k = next;
        k += 1;
    }
    Ok(StepOutcome { sections, truncated })
}

/// Interval of an affine row over a box.
fn row_interval(row: &SparseRow, lo: &DVector<f64>, hi: &DVector<f64>) -> (f64, f64) {
    let mut a = row.constant;
    let mut b = row.constant;
    for &(j, c) in &row.entries {
        if c >= 0.0 {
            a += c * lo[j];
            b += c * hi[j];
        } else {
            a += c * hi[j];
            b += c * lo[j];
        }
    }
    (a, b)
}

/// Interval of the clamped decay value over start interval `[vlo, vhi]`,
/// rate interval `[klo, khi]` and elapsed-time interval `[tlo, thi]`.
fn decay_interval(
    d: &DecayRow,
    vlo: f64,
    vhi: f64,
    klo: f64,
    khi: f64,
    tlo: f64,
    thi: f64,
) -> (f64, f64) {
    let exps = [
        (-khi * thi / d.tc).exp(),
        (-khi * tlo / d.tc).exp(),
        (-klo * thi / d.tc).exp(),
        (-klo * tlo / d.tc).exp(),
    ];
    let fmin = exps.iter().cloned().fold(f64::INFINITY, f64::min);
    let fmax = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cands = [vlo * fmin, vlo * fmax, vhi * fmin, vhi * fmax];
    let mut out_lo = f64::INFINITY;
    let mut out_hi = f64::NEG_INFINITY;
    for c in cands {
        out_lo = out_lo.min(c);
        out_hi = out_hi.max(c);
    }
    (out_lo.max(d.floor), out_hi.max(d.floor))
}

fn reach_interval(
    sf: &SplitFlow,
    invariant: Option<&Polytope>,
    x0: &Polytope,
    cfg: &ReachConfig,
) -> Result<StepOutcome> {
    let n = sf.rows.len();
    let mut is_decay = vec![false; n];
    for d in &sf.decays {
        is_decay[d.coord] = true;
    }
    for (i, row) in sf.rows.iter().enumerate() {
        if is_decay[i] {
            continue;
        }
        if row.entries.iter().any(|&(j, c)| c != 0.0 && is_decay[j]) {
            return Err(ReachError::UnsupportedFlow(
                "affine row reads a decay coordinate".into(),
            ));
        }
    }
    for d in &sf.decays {
        let ef_row = &sf.rows[d.ef];
        if ef_row.constant != 0.0 || ef_row.entries.iter().any(|&(_, c)| c != 0.0) {
            return Err(ReachError::UnsupportedFlow(
                "decay rate coordinate must be constant along the flow".into(),
            ));
        }
    }

    // Dense augmented matrix over the non-decay coordinates.
    let reduced: Vec<usize> = (0..n).filter(|&i| !is_decay[i]).collect();
    let red_of: Vec<Option<usize>> = {
        let mut m = vec![None; n];
        for (ri, &i) in reduced.iter().enumerate() {
            m[i] = Some(ri);
        }
        m
    };
    let m = reduced.len();
    let mut a_hat = DMatrix::zeros(m + 1, m + 1);
    for (ri, &i) in reduced.iter().enumerate() {
        for &(j, c) in &sf.rows[i].entries {
            a_hat[(ri, red_of[j].expect("validated non-decay"))] += c;
        }
        a_hat[(ri, m)] = sf.rows[i].constant;
    }

    let (mut lo, mut hi) = poly_box(x0)?;
    if let Some(inv) = invariant {
        if icp_clip(&mut lo, &mut hi, inv.a(), inv.b()).is_none() {
            return Err(ReachError::EmptyInitial);
        }
    }

    let step_map = |dt: f64| -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
        let ed = mat_exp(&a_hat, dt)?;
        let e = ed.view((0, 0), (m, m)).into_owned();
        let f = ed.view((0, m), (m, 1)).column(0).into_owned();
        let mut e_abs = e.clone();
        e_abs.apply(|x| *x = x.abs());
        Ok((e, e_abs, f))
    };
    let full = step_map(cfg.delta)?;

    let mut sections = Vec::new();
    let mut k = 0usize;
    loop {
        let t_lo = k as f64 * cfg.delta;
        if t_lo >= cfg.horizon - TIME_EPS || k >= MAX_STEPS {
            break;
        }
        let dt = cfg.delta.min(cfg.horizon - t_lo);
        let partial = dt < cfg.delta - TIME_EPS;
        let maps;
        let (e, e_abs, f) = if partial {
            maps = step_map(dt)?;
            (&maps.0, &maps.1, &maps.2)
        } else {
            (&full.0, &full.1, &full.2)
        };

        // Endpoint box of the non-decay subsystem.
        let mut c_red = DVector::zeros(m);
        let mut r_red = DVector::zeros(m);
        for (ri, &i) in reduced.iter().enumerate() {
            c_red[ri] = 0.5 * (lo[i] + hi[i]);
            r_red[ri] = 0.5 * (hi[i] - lo[i]);
        }
        let c_next = e * &c_red + f;
        let r_next = e_abs * &r_red;

        // Certified enclosure of the arc over [0, dt].
        let mut b_lo = lo.clone();
        let mut b_hi = hi.clone();
        for &i in &reduced {
            let (dl, dh) = row_interval(&sf.rows[i], &lo, &hi);
            b_lo[i] += dt * dl.min(0.0);
            b_hi[i] += dt * dh.max(0.0);
        }
        let mut enclosed = false;
        for _ in 0..40 {
            let mut cand_lo = lo.clone();
            let mut cand_hi = hi.clone();
            let mut inside = true;
            for &i in &reduced {
                let (dl, dh) = row_interval(&sf.rows[i], &b_lo, &b_hi);
                cand_lo[i] = lo[i] + dt * dl.min(0.0);
                cand_hi[i] = hi[i] + dt * dh.max(0.0);
                if cand_lo[i] < b_lo[i] - 1e-12 || cand_hi[i] > b_hi[i] + 1e-12 {
                    inside = false;
                }
            }
            if inside {
                b_lo = cand_lo;
                b_hi = cand_hi;
                enclosed = true;
                break;
            }
            for &i in &reduced {
                let w = 0.1 * (cand_hi[i] - cand_lo[i]).max(1e-9);
                b_lo[i] = b_lo[i].min(cand_lo[i] - w);
                b_hi[i] = b_hi[i].max(cand_hi[i] + w);
            }
        }
        if !enclosed {
            return Err(ReachError::UnsupportedFlow(
                "could not certify an arc enclosure; reduce delta".into(),
            ));
        }

        // Chord bound: the arc deviates from the endpoint chord by at most
        // dt^2/8 * max |second derivative| per coordinate.
        let mut v1_lo = DVector::zeros(n);
        let mut v1_hi = DVector::zeros(n);
        for &i in &reduced {
            let (a0, b0) = row_interval(&sf.rows[i], &b_lo, &b_hi);
            v1_lo[i] = a0;
            v1_hi[i] = b0;
        }
        let mut sec_lo = lo.clone();
        let mut sec_hi = hi.clone();
        for (ri, &i) in reduced.iter().enumerate() {
            let mut d2_lo = 0.0;
            let mut d2_hi = 0.0;
            for &(j, c) in &sf.rows[i].entries {
                if c >= 0.0 {
                    d2_lo += c * v1_lo[j];
                    d2_hi += c * v1_hi[j];
                } else {
                    d2_lo += c * v1_hi[j];
                    d2_hi += c * v1_lo[j];
                }
            }
            let margin = dt * dt / 8.0 * d2_lo.abs().max(d2_hi.abs());
            let e_lo = c_next[ri] - r_next[ri];
            let e_hi = c_next[ri] + r_next[ri];
            sec_lo[i] = lo[i].min(e_lo) - margin - cfg.eps;
            sec_hi[i] = hi[i].max(e_hi) + margin + cfg.eps;
        }
        for d in &sf.decays {
            let (alo, ahi) =
                decay_interval(d, lo[d.coord], hi[d.coord], lo[d.ef], hi[d.ef], 0.0, dt);
            sec_lo[d.coord] = alo - cfg.eps;
            sec_hi[d.coord] = ahi + cfg.eps;
        }

        let mut section = Polytope::from_box(&sec_lo, &sec_hi)?;
        if let Some(inv) = invariant {
            let mut s_lo = sec_lo.clone();
            let mut s_hi = sec_hi.clone();
            if icp_clip(&mut s_lo, &mut s_hi, inv.a(), inv.b()).is_none() {
                break;
            }
            section = Polytope::from_box(&s_lo, &s_hi)?.intersect(inv)?;
        }
        sections.push(Section { k, t_lo, t_hi: t_lo + dt, set: section });

        let mut next_lo = lo.clone();
        let mut next_hi = hi.clone();
        for (ri, &i) in reduced.iter().enumerate() {
            next_lo[i] = c_next[ri] - r_next[ri];
            next_hi[i] = c_next[ri] + r_next[ri];
        }
        for d in &sf.decays {
            let (alo, ahi) =
                decay_interval(d, lo[d.coord], hi[d.coord], lo[d.ef], hi[d.ef], dt, dt);
            next_lo[d.coord] = alo;
            next_hi[d.coord] = ahi;
        }
        if let Some(inv) = invariant {
            if icp_clip(&mut next_lo, &mut next_hi, inv.a(), inv.b()).is_none() {
                break;
            }
        }
        lo = next_lo;
        hi = next_hi;
        k += 1;
    }
    Ok(StepOutcome { sections, truncated: false })
}
