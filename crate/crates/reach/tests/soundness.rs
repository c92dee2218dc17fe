//! Flowpipes against the closed-form flow: every simulated trajectory point
//! must land inside the section covering its time, for random stable and
//! unstable linear systems and for both engines.

use hybrid_core::{flow, FlowSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reach::{poly_box, reach_flow, ReachConfig, TemplateChoice};
use setgeom::Polytope;

fn random_affine(rng: &mut ChaCha8Rng, n: usize) -> FlowSpec {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
    FlowSpec::LinearOde { a, b }
}

fn random_box(rng: &mut ChaCha8Rng, n: usize) -> Polytope {
    let lo = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..0.0));
    let wid = DVector::from_fn(n, |_, _| rng.gen_range(0.1..1.0));
    Polytope::from_box(&lo, &(&lo + &wid)).unwrap()
}

fn corners_and_center(lo: &DVector<f64>, hi: &DVector<f64>, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let n = lo.len();
    let mut pts = vec![(lo + hi) * 0.5];
    for _ in 0..6 {
        pts.push(DVector::from_fn(n, |i, _| rng.gen_range(lo[i]..=hi[i])));
    }
    pts
}

fn check_engine(templates: TemplateChoice, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..8 {
        let n = rng.gen_range(2..=4);
        let fl = random_affine(&mut rng, n);
        let x0 = random_box(&mut rng, n);
        let (lo, hi) = poly_box(&x0).unwrap();
        let cfg = ReachConfig::default()
            .with_delta(0.05)
            .with_horizon(1.0)
            .with_templates(templates.clone());
        let (segs, truncated) = reach_flow(&fl, None, &x0, &cfg).unwrap();
        assert!(!truncated, "case {case}: unexpected truncation");
        assert_eq!(segs.len(), 20);
        for start in corners_and_center(&lo, &hi, &mut rng) {
            for s in &segs {
                for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    let t = s.t_lo + frac * (s.t_hi - s.t_lo);
                    let exact = flow(&fl, &start, t).unwrap();
                    assert!(
                        s.set.contains(&exact, 1e-7),
                        "case {case}: point at t={t} escapes segment {}",
                        s.k
                    );
                }
            }
        }
    }
}

#[test]
fn support_engine_contains_simulated_points() {
    check_engine(TemplateChoice::Octagonal, 11);
}

#[test]
fn box_template_run_contains_simulated_points() {
    check_engine(TemplateChoice::Box, 12);
}

#[test]
fn interval_engine_contains_simulated_points_in_high_dimension() {
    // Dimension above the box fast-path switch, so the interval engine runs
    // even though the flow is plain affine.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 14;
    let a = DMatrix::from_fn(n, n, |i, j| {
        if (i as i64 - j as i64).abs() <= 1 {
            rng.gen_range(-0.6..0.6)
        } else {
            0.0
        }
    });
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-0.2..0.2));
    let fl = FlowSpec::LinearOde { a, b };
    let x0 = random_box(&mut rng, n);
    let (lo, hi) = poly_box(&x0).unwrap();
    let cfg = ReachConfig::default().with_delta(0.05).with_horizon(1.0);
    let (segs, _) = reach_flow(&fl, None, &x0, &cfg).unwrap();
    for start in corners_and_center(&lo, &hi, &mut rng) {
        for s in &segs {
            for frac in [0.0, 0.5, 1.0] {
                let t = s.t_lo + frac * (s.t_hi - s.t_lo);
                let exact = flow(&fl, &start, t).unwrap();
                assert!(s.set.contains(&exact, 1e-7), "t={t} escapes");
            }
        }
    }
}

#[test]
fn segments_tile_the_horizon_without_gaps() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..6 {
        let n = rng.gen_range(1..=3);
        let fl = random_affine(&mut rng, n);
        let x0 = random_box(&mut rng, n);
        let horizon = rng.gen_range(0.3..1.5);
        let delta = rng.gen_range(0.02..0.2);
        let cfg = ReachConfig::default().with_delta(delta).with_horizon(horizon);
        let (segs, truncated) = reach_flow(&fl, None, &x0, &cfg).unwrap();
        if truncated {
            continue;
        }
        assert!((segs[0].t_lo).abs() < 1e-12);
        for w in segs.windows(2) {
            assert!(
                (w[0].t_hi - w[1].t_lo).abs() < 1e-12,
                "gap between segments {} and {}",
                w[0].k,
                w[1].k
            );
        }
        assert!((segs.last().unwrap().t_hi - horizon).abs() < 1e-9);
    }
}
