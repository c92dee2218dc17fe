use hybrid_core::{
    compose, flow, simulate, Automaton, DecayRow, EdgeDef, FlowSpec, Guard, HybridAutomaton,
    Reset, SimConfig, SparseRow,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use setgeom::Polytope;

fn small_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n * n)
        .prop_map(move |v| DMatrix::from_vec(n, n, v))
}

fn small_vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    proptest::collection::vec(-2.0f64..2.0, n).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_flow_is_a_semigroup(
        a in small_matrix(3),
        b in small_vector(3),
        x in small_vector(3),
        t1 in 0.0f64..1.5,
        t2 in 0.0f64..1.5,
    ) {
        let f = FlowSpec::LinearOde { a, b };
        let direct = flow(&f, &x, t1 + t2).unwrap();
        let staged = flow(&f, &flow(&f, &x, t1).unwrap(), t2).unwrap();
        for i in 0..3 {
            prop_assert!((direct[i] - staged[i]).abs() < 1e-9,
                "coordinate {i}: {} vs {}", direct[i], staged[i]);
        }
    }

    #[test]
    fn decay_flow_is_a_semigroup(
        v0 in 0.05f64..3.0,
        ef in 0.0f64..2.0,
        t1 in 0.0f64..4.0,
        t2 in 0.0f64..4.0,
    ) {
        let f = FlowSpec::ThresholdDecay {
            rates: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            decay: DecayRow { coord: 1, ef: 2, tc: 1.0, floor: 0.1 },
        };
        let x = DVector::from_vec(vec![0.0, v0, ef]);
        let direct = flow(&f, &x, t1 + t2).unwrap();
        let staged = flow(&f, &flow(&f, &x, t1).unwrap(), t2).unwrap();
        prop_assert!((direct[1] - staged[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_time_flow_is_identity(
        a in small_matrix(2),
        b in small_vector(2),
        x in small_vector(2),
    ) {
        let f = FlowSpec::LinearOde { a, b };
        prop_assert_eq!(flow(&f, &x, 0.0).unwrap(), x);
    }

    #[test]
    fn jump_pre_states_satisfy_guards(period in 0.3f64..2.0, x0 in 0.0f64..0.25) {
        let mut aut = HybridAutomaton::new("cycle", 1, vec!["x".into()]).unwrap();
        let m = aut.add_mode("run", FlowSpec::Clock { rates: DVector::from_vec(vec![1.0]) }, None).unwrap();
        aut.add_edge(EdgeDef {
            src: m,
            dst: m,
            guard: Guard::halfspace(1, &[(0, -1.0)], -period),
            reset: Reset::identity(1).assign_const(0, 0.0),
            label: "wrap".into(),
            emits: vec![],
            trigger: None,
        }).unwrap();
        aut.set_init(m, Polytope::singleton(&DVector::from_vec(vec![x0]))).unwrap();
        let cfg = SimConfig { duration: 7.0, dt: 0.05, ..Default::default() };
        let exec = simulate(&aut, &cfg).unwrap();
        let guard_poly = &aut.edge_def(0).guard.poly;
        let mut last_t = 0.0;
        for j in &exec.jumps {
            prop_assert!(j.t >= last_t);
            last_t = j.t;
            let pre = j.pre.as_ref().unwrap();
            prop_assert!(guard_poly.violation(pre) <= 1e-6, "violation {}", guard_poly.violation(pre));
            let post = j.post.as_ref().unwrap();
            prop_assert!((post[0]).abs() < 1e-12);
        }
        for w in exec.trace.windows(2) {
            prop_assert!(w[1].t >= w[0].t - 1e-12);
        }
    }

    #[test]
    fn independent_composition_counts_jumps(
        p1 in 0.4f64..0.9,
        p2 in 1.1f64..1.9,
    ) {
        let horizon = 5.015;
        // Keep multiples away from the horizon so counts are unambiguous.
        let n1 = (horizon / p1).floor();
        let n2 = (horizon / p2).floor();
        prop_assume!((horizon - n1 * p1).abs() > 1e-3);
        prop_assume!((horizon - n2 * p2).abs() > 1e-3);

        let mk = |name: &str, period: f64| {
            let mut a = HybridAutomaton::new(name, 1, vec!["x".into()]).unwrap();
            let m = a.add_mode("run", FlowSpec::Clock { rates: DVector::from_vec(vec![1.0]) }, None).unwrap();
            a.add_edge(EdgeDef {
                src: m,
                dst: m,
                guard: Guard::halfspace(1, &[(0, -1.0)], -period),
                reset: Reset::identity(1).assign_const(0, 0.0),
                label: "wrap".into(),
                emits: vec![],
                trigger: None,
            }).unwrap();
            a.set_init(m, Polytope::singleton(&DVector::from_vec(vec![0.0]))).unwrap();
            a
        };
        let a1 = mk("first", p1);
        let a2 = mk("second", p2);
        let prod = compose("pair", &[&a1, &a2], 8).unwrap();
        let cfg = SimConfig { duration: horizon, dt: 0.02, ..Default::default() };
        let exec = simulate(&prod, &cfg).unwrap();
        prop_assert_eq!(exec.jump_count() as f64, n1 + n2);
    }

    #[test]
    fn affine_reset_rows_apply_simultaneously(
        m_entries in proptest::collection::vec(-2.0f64..2.0, 4),
        c_entries in proptest::collection::vec(-1.0f64..1.0, 2),
        x in small_vector(2),
    ) {
        let m = DMatrix::from_vec(2, 2, m_entries);
        let c = DVector::from_vec(c_entries);
        let r = Reset::from_affine(&m, &c).unwrap();
        let expect = &m * &x + &c;
        let got = r.apply(&x);
        for i in 0..2 {
            prop_assert!((expect[i] - got[i]).abs() < 1e-12);
        }
        let sparse_rows: Vec<(usize, SparseRow)> = r.rows().to_vec();
        let r2 = Reset::from_rows(2, sparse_rows).unwrap();
        prop_assert_eq!(r.apply(&x), r2.apply(&x));
    }
}
