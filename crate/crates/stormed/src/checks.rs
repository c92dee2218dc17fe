//! The five certificate checks: separability of reset images from successor
//! guards, the semigroup property of flows, flow and reset monotonicity
//! along `phi`, and band delimiting of guard activity. All sampled checks
//! are deterministic for a fixed seed.

use crate::cert::{CertReport, CheckOutcome, StormedCertificate, Witness};
use crate::error::{Result, StormedError};
use crate::sample::{CheckConfig, SampleSpace};
use hybrid_core::{flow, Automaton, EdgeInstance, Execution, ModeKey, Reset};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use setgeom::{affine_image, poly_distance_pair, sample_polytope, Polytope, Support};

/// How the separability walk treats edge pairs.
#[derive(Clone, Debug)]
pub struct SeparabilityOptions {
    /// Skip successor edges that enter a terminal mode. Executions stop
    /// there, so no further uniform progress is required of them; the global
    /// time bound edges of the bundled models would otherwise sit at
    /// distance zero from every late jump image.
    pub skip_terminal_targets: bool,
    /// Above this dimension reset images are box over-approximations
    /// instead of exact polytope images (distances shrink, never grow).
    pub exact_image_dim: usize,
}

impl Default for SeparabilityOptions {
    fn default() -> Self {
        Self { skip_terminal_targets: true, exact_image_dim: 6 }
    }
}

fn guard_set(aut: &dyn Automaton, mode: &ModeKey, edge: &EdgeInstance) -> Result<Polytope> {
    match aut.invariant(mode) {
        Some(inv) => Ok(edge.guard.poly.intersect(&inv)?),
        None => Ok(edge.guard.poly.clone()),
    }
}

fn abs_mat(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut a = m.clone();
    a.apply(|x| *x = x.abs());
    a
}

/// Box hull of a bounded polytope.
fn set_box(p: &Polytope) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = p.dim();
    let mut lo = DVector::zeros(n);
    let mut hi = DVector::zeros(n);
    let mut d = DVector::zeros(n);
    for i in 0..n {
        d[i] = 1.0;
        match p.support(&d) {
            Support::Value { rho, .. } => hi[i] = rho,
            _ => return Err(StormedError::UnboundedGuard(format!("coordinate {i}"))),
        }
        d[i] = -1.0;
        match p.support(&d) {
            Support::Value { rho, .. } => lo[i] = -rho,
            _ => return Err(StormedError::UnboundedGuard(format!("coordinate {i}"))),
        }
        d[i] = 0.0;
    }
    Ok((lo, hi))
}

/// Image of `src` under a reset, exact through the affine class in low
/// dimension and a box over-approximation otherwise. Over-approximation is
/// the conservative direction here: it can only shrink reported distances.
fn reset_image(reset: &Reset, src: &Polytope, exact_dim: usize) -> Result<Polytope> {
    let (m, c) = reset.to_dense();
    if reset.residual.is_none() && src.dim() <= exact_dim {
        return Ok(affine_image(src, &m, &c)?);
    }
    let (lo, hi) = set_box(src)?;
    let mid = (&lo + &hi) * 0.5;
    let rad = (&hi - &lo) * 0.5;
    let center = &m * &mid + &c;
    let spread = abs_mat(&m) * rad;
    let mut ilo = &center - &spread;
    let mut ihi = &center + &spread;
    if let Some(res) = &reset.residual {
        for (coord, wlo, whi) in (res.interval)(&lo, &hi) {
            ilo[coord] = wlo;
            ihi[coord] = whi;
        }
    }
    Ok(Polytope::from_box(&ilo, &ihi)?)
}

/// (S): every jump image keeps a `d_min` gap to every guard leaving the
/// destination mode for a third mode.
pub fn check_separability(
    aut: &dyn Automaton,
    d_min: f64,
    opts: &SeparabilityOptions,
) -> Result<CheckOutcome> {
    let modes = aut
        .modes()
        .ok_or_else(|| StormedError::BadCertificate("separability needs enumerable modes".into()))?;
    let mut pairs = 0usize;
    let mut skipped_terminal = 0usize;
    let mut worst = f64::INFINITY;
    let mut witness: Option<Witness> = None;

    for src in &modes {
        for e in aut.edges_from(src) {
            if e.trigger.is_some() {
                continue;
            }
            let g = guard_set(aut, src, &e)?;
            if g.is_empty() {
                continue;
            }
            if !g.is_bounded() {
                return Err(StormedError::UnboundedGuard(e.label.clone()));
            }
            let dst = e.dst_mode_full(src);
            if dst == *src {
                continue;
            }
            let reset = Reset::merge(
                aut.dim(),
                &e.parts.iter().map(|p| p.reset.as_ref()).collect::<Vec<_>>(),
            )?;
            let image = reset_image(&reset, &g, opts.exact_image_dim)?;
            for succ in aut.edges_from(&dst) {
                if succ.trigger.is_some() {
                    continue;
                }
                let third = succ.dst_mode_full(&dst);
                if third == dst {
                    continue;
                }
                if opts.skip_terminal_targets && aut.is_terminal(&third) {
                    skipped_terminal += 1;
                    continue;
                }
                let target = guard_set(aut, &dst, &succ)?;
                if target.is_empty() {
                    continue;
                }
                if !target.is_bounded() {
                    return Err(StormedError::UnboundedGuard(succ.label.clone()));
                }
                let (dist, p_img, _) = poly_distance_pair(&image, &target)?;
                pairs += 1;
                let slack = dist - d_min;
                if slack < worst {
                    worst = slack;
                    if slack <= 0.0 && witness.is_none() {
                        witness = Some(Witness {
                            mode: aut.mode_name(&dst),
                            x: p_img.iter().copied().collect(),
                            t: None,
                            note: format!(
                                "image of `{}` at distance {:.3e} from guard `{}`",
                                e.label, dist, succ.label
                            ),
                        });
                    }
                }
            }
        }
    }

    let detail = format!(
        "{pairs} edge pairs, {skipped_terminal} terminal-target pairs skipped, d_min {d_min:.3e}"
    );
    Ok(match witness {
        None => CheckOutcome::pass("separability", worst, detail),
        Some(w) => CheckOutcome::fail("separability", worst, detail, w),
    })
}

/// (T) core: the propagator must satisfy `theta(t+t') = theta(t', theta(t))`
/// and `theta(0) = id` on sampled states.
pub fn check_tisg_with<F>(
    propagate: F,
    space: &SampleSpace,
    cfg: &CheckConfig,
    tol: f64,
) -> Result<CheckOutcome>
where
    F: Fn(&ModeKey, &DVector<f64>, f64) -> Result<DVector<f64>>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per = (cfg.samples / space.regions.len().max(1)).max(1);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut tested = 0usize;
    for (mode, x) in space.draw(&mut rng, per) {
        let zero = propagate(&mode, &x, 0.0)?;
        let id_err = (&zero - &x).norm();
        let scale = tol * (1.0 + x.norm());
        if scale - id_err < worst {
            worst = scale - id_err;
        }
        if id_err > scale && witness.is_none() {
            witness = Some(Witness {
                mode: format!("{mode}"),
                x: x.iter().copied().collect(),
                t: Some(0.0),
                note: format!("theta(0;x) differs from x by {id_err:.3e}"),
            });
        }
        let t = rng.gen_range(0.0..space.t_max * 0.5);
        let tp = rng.gen_range(0.0..space.t_max * 0.5);
        let direct = propagate(&mode, &x, t + tp)?;
        let stepped = propagate(&mode, &propagate(&mode, &x, t)?, tp)?;
        let err = (&direct - &stepped).norm();
        let slack = scale - err;
        if slack < worst {
            worst = slack;
        }
        if err > scale && witness.is_none() {
            witness = Some(Witness {
                mode: format!("{mode}"),
                x: x.iter().copied().collect(),
                t: Some(t),
                note: format!("semigroup gap {err:.3e} at t={t:.4}, t'={tp:.4}"),
            });
        }
        tested += 1;
    }
    let detail = format!("{tested} samples, tol {tol:.1e} x (1+|x|)");
    Ok(match witness {
        None => CheckOutcome::pass("semigroup", worst, detail),
        Some(w) => CheckOutcome::fail("semigroup", worst, detail, w),
    })
}

/// (T): flows of `aut` are time-independent semigroups.
pub fn check_tisg(
    aut: &dyn Automaton,
    space: &SampleSpace,
    cfg: &CheckConfig,
    tol: f64,
) -> Result<CheckOutcome> {
    check_tisg_with(
        |m, x, t| Ok(flow(&aut.flow(m), x, t)?),
        space,
        cfg,
        tol,
    )
}

/// (RM) flows: along every sampled trajectory chunk, progress along `phi`
/// dominates `eps` times the distance moved.
pub fn check_flow_monotonic(
    aut: &dyn Automaton,
    cert: &StormedCertificate,
    space: &SampleSpace,
    cfg: &CheckConfig,
) -> Result<CheckOutcome> {
    let phi = cert.phi_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1);
    let per = (cfg.samples / space.regions.len().max(1)).max(1);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut tested = 0usize;
    let mut skipped = 0usize;
    for (mode, x) in space.draw(&mut rng, per) {
        let spec = aut.flow(&mode);
        let region = space.region_of(&mode).expect("drawn from region");
        let t = rng.gen_range(0.0..space.t_max * 0.5);
        let tau = rng.gen_range(1e-6..space.t_max * 0.5);
        let a = flow(&spec, &x, t)?;
        let b = flow(&spec, &x, t + tau)?;
        if !region.contains(&a, 1e-6) || !region.contains(&b, 1e-6) {
            skipped += 1;
            continue;
        }
        let delta = &b - &a;
        let norm = delta.norm();
        if norm <= cfg.zero_tol {
            continue;
        }
        let slack = phi.dot(&delta) - cert.eps * norm;
        tested += 1;
        if slack < worst {
            worst = slack;
        }
        if slack < -cfg.slack && witness.is_none() {
            witness = Some(Witness {
                mode: aut.mode_name(&mode),
                x: a.iter().copied().collect(),
                t: Some(tau),
                note: format!("phi.delta = {:.3e} < eps|delta| = {:.3e}", phi.dot(&delta), cert.eps * norm),
            });
        }
    }
    let detail = format!("{tested} flow chunks ({skipped} left the region), eps {:.3e}", cert.eps);
    Ok(match witness {
        None => CheckOutcome::pass("flow-monotonic", worst, detail),
        Some(w) => CheckOutcome::fail("flow-monotonic", worst, detail, w),
    })
}

/// (RM) resets: sampled jumps either stand still (same-mode case), advance
/// `phi` by `zeta` (same mode), or advance by `eps` times the displacement
/// (mode change).
pub fn check_reset_monotonic(
    aut: &dyn Automaton,
    cert: &StormedCertificate,
    space: &SampleSpace,
    cfg: &CheckConfig,
) -> Result<CheckOutcome> {
    let phi = cert.phi_vec();
    let modes = aut
        .modes()
        .ok_or_else(|| StormedError::BadCertificate("reset check needs enumerable modes".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x2);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut tested = 0usize;
    let n_edges: usize = modes.iter().map(|m| aut.edges_from(m).len()).sum();
    let per_edge = (cfg.samples / n_edges.max(1)).clamp(4, 256);

    for src in &modes {
        for e in aut.edges_from(src) {
            let g = match space.region_of(src) {
                Some(region) => e.guard.poly.intersect(region)?,
                None => guard_set(aut, src, &e)?,
            };
            if g.is_empty() {
                continue;
            }
            if !g.is_bounded() {
                return Err(StormedError::UnboundedGuard(e.label.clone()));
            }
            let dst = e.dst_mode_full(src);
            let same_mode = dst == *src;
            let reset = Reset::merge(
                aut.dim(),
                &e.parts.iter().map(|p| p.reset.as_ref()).collect::<Vec<_>>(),
            )?;
            for x in sample_polytope(&mut rng, &g, per_edge) {
                if !e.guard.satisfied(&x, 1e-7) {
                    continue;
                }
                let post = reset.apply(&x)?;
                let delta = &post - &x;
                let norm = delta.norm();
                tested += 1;
                let (slack, req) = if same_mode {
                    if norm <= cfg.zero_tol {
                        continue;
                    }
                    (phi.dot(&delta) - cert.zeta, format!("zeta {:.3e}", cert.zeta))
                } else {
                    if norm <= cfg.zero_tol {
                        continue;
                    }
                    (phi.dot(&delta) - cert.eps * norm, format!("eps|delta| {:.3e}", cert.eps * norm))
                };
                if slack < worst {
                    worst = slack;
                }
                if slack < -cfg.slack && witness.is_none() {
                    witness = Some(Witness {
                        mode: aut.mode_name(src),
                        x: x.iter().copied().collect(),
                        t: None,
                        note: format!(
                            "edge `{}`: phi.delta = {:.3e} below {req}",
                            e.label,
                            phi.dot(&delta)
                        ),
                    });
                }
            }
        }
    }
    let detail = format!("{tested} sampled jumps across {n_edges} edges");
    Ok(match witness {
        None => CheckOutcome::pass("reset-monotonic", worst, detail),
        Some(w) => CheckOutcome::fail("reset-monotonic", worst, detail, w),
    })
}

/// (ED): `phi . x` stays strictly inside `(b_minus, b_plus)` on every guard.
pub fn check_ends_delimited(
    aut: &dyn Automaton,
    cert: &StormedCertificate,
) -> Result<CheckOutcome> {
    let phi = cert.phi_vec();
    let modes = aut
        .modes()
        .ok_or_else(|| StormedError::BadCertificate("delimiting needs enumerable modes".into()))?;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut guards = 0usize;
    for src in &modes {
        for e in aut.edges_from(src) {
            let g = guard_set(aut, src, &e)?;
            if g.is_empty() {
                continue;
            }
            let hi = match g.support(&phi) {
                Support::Value { rho, .. } => rho,
                Support::Unbounded => {
                    let w = Witness {
                        mode: aut.mode_name(src),
                        x: vec![],
                        t: None,
                        note: format!("guard `{}` unbounded along phi", e.label),
                    };
                    return Ok(CheckOutcome::fail(
                        "ends-delimited",
                        f64::NEG_INFINITY,
                        "unbounded guard".into(),
                        w,
                    ));
                }
                Support::Empty => continue,
            };
            let lo = match g.support(&(-&phi)) {
                Support::Value { rho, .. } => -rho,
                Support::Unbounded => {
                    let w = Witness {
                        mode: aut.mode_name(src),
                        x: vec![],
                        t: None,
                        note: format!("guard `{}` unbounded along -phi", e.label),
                    };
                    return Ok(CheckOutcome::fail(
                        "ends-delimited",
                        f64::NEG_INFINITY,
                        "unbounded guard".into(),
                        w,
                    ));
                }
                Support::Empty => continue,
            };
            guards += 1;
            let slack = (cert.b_plus - hi).min(lo - cert.b_minus);
            if slack < worst {
                worst = slack;
            }
            if slack < 0.0 && witness.is_none() {
                witness = Some(Witness {
                    mode: aut.mode_name(src),
                    x: vec![],
                    t: None,
                    note: format!(
                        "guard `{}` has phi.x in [{lo:.4}, {hi:.4}] outside ({}, {})",
                        e.label, cert.b_minus, cert.b_plus
                    ),
                });
            }
        }
    }
    let detail = format!("{guards} guards against band ({:.4}, {:.4})", cert.b_minus, cert.b_plus);
    Ok(match witness {
        None => CheckOutcome::pass("ends-delimited", worst, detail),
        Some(w) => CheckOutcome::fail("ends-delimited", worst, detail, w),
    })
}

/// Run all five checks plus the structural definability note.
pub fn check_all(
    aut: &dyn Automaton,
    cert: &StormedCertificate,
    space: &SampleSpace,
    cfg: &CheckConfig,
    sep_opts: &SeparabilityOptions,
) -> Result<CertReport> {
    cert.validate()?;
    let mut report = CertReport::default();
    report.push(check_separability(aut, cert.d_min, sep_opts)?);
    report.push(check_tisg(aut, space, cfg, 1e-9)?);
    report.push(CheckOutcome::pass(
        "definability",
        f64::INFINITY,
        "structural: polynomial/exponential/clamped-decay ingredients only".into(),
    ));
    report.push(check_flow_monotonic(aut, cert, space, cfg)?);
    report.push(check_reset_monotonic(aut, cert, space, cfg)?);
    report.push(check_ends_delimited(aut, cert)?);
    Ok(report)
}

/// Along a simulated execution, `phi . x` must never decrease (up to slack).
/// Returns the first violating (time, drop) pair.
pub fn first_monotonicity_break(
    exec: &Execution,
    phi: &DVector<f64>,
    slack: f64,
) -> Option<(f64, f64)> {
    let mut last: Option<(f64, f64)> = None;
    for p in &exec.trace {
        let v = phi.dot(&p.x);
        if let Some((t_prev, v_prev)) = last {
            if v < v_prev - slack {
                return Some((p.t.max(t_prev), v_prev - v));
            }
        }
        last = Some((p.t, v));
    }
    None
}
