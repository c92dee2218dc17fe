//! Eager composition of explicit automata via the product machinery.

use crate::automaton::{Automaton, HybridAutomaton};
use crate::error::{HybridError, Result};
use crate::flow::{DecayRow, FlowSpec, SparseRow};
use crate::guard::{Guard, GuardResidual, Reset, ResetResidual};
use crate::product::{Component, ComponentEdge, ProductAutomaton, ProductBuilder, ProductFlow};
use nalgebra::{DMatrix, DVector};
use setgeom::Polytope;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Wraps an explicit automaton as a product component occupying coordinates
/// `offset .. offset + dim` of the shared space. All guards, resets and flows
/// are lifted once at construction.
pub struct ExplicitComponent {
    aut: Arc<HybridAutomaton>,
    offset: usize,
    local: Vec<Vec<Arc<ComponentEdge>>>,
    trig: Vec<BTreeMap<String, Vec<Arc<ComponentEdge>>>>,
    listens: Vec<String>,
    emits: Vec<String>,
}

impl ExplicitComponent {
    pub fn new(aut: Arc<HybridAutomaton>, offset: usize, total_dim: usize) -> Result<Self> {
        let n = aut.dim();
        if offset + n > total_dim {
            return Err(HybridError::DimensionMismatch { expected: total_dim, got: offset + n });
        }
        let mut local = vec![Vec::new(); aut.n_modes()];
        let mut trig: Vec<BTreeMap<String, Vec<Arc<ComponentEdge>>>> =
            vec![BTreeMap::new(); aut.n_modes()];
        let mut listens = Vec::new();
        let mut emits = Vec::new();
        for m in 0..aut.n_modes() {
            for &ei in aut.outgoing(m) {
                let e = aut.edge_def(ei);
                let lifted = Arc::new(ComponentEdge {
                    label: e.label.clone(),
                    guard: lift_guard(&e.guard, offset, n, total_dim)?,
                    reset: lift_reset(&e.reset, offset, n, total_dim)?,
                    dst_seg: vec![e.dst as u16],
                    emits: e.emits.clone(),
                });
                emits.extend(e.emits.iter().cloned());
                match &e.trigger {
                    None => local[m].push(lifted),
                    Some(ev) => {
                        listens.push(ev.clone());
                        trig[m].entry(ev.clone()).or_default().push(lifted);
                    }
                }
            }
        }
        listens.sort();
        listens.dedup();
        emits.sort();
        emits.dedup();
        Ok(Self { aut, offset, local, trig, listens, emits })
    }

    fn mode(&self, seg: &[u16]) -> usize {
        seg[0] as usize
    }
}

fn lift_guard(g: &Guard, offset: usize, n: usize, total: usize) -> Result<Guard> {
    let rows = g.poly.nrows();
    let mut a = DMatrix::zeros(rows, total);
    for i in 0..rows {
        for j in 0..n {
            a[(i, offset + j)] = g.poly.a()[(i, j)];
        }
    }
    let poly = Polytope::new(a, g.poly.b().clone())?;
    let residual = g.residual.as_ref().map(|r| {
        let eval = r.eval.clone();
        GuardResidual {
            label: r.label.clone(),
            eval: Arc::new(move |x: &DVector<f64>| {
                let local = x.rows(offset, n).into_owned();
                eval(&local)
            }),
        }
    });
    Ok(Guard { poly, residual })
}

fn lift_reset(r: &Reset, offset: usize, n: usize, total: usize) -> Result<Reset> {
    let rows = r
        .rows()
        .iter()
        .map(|(i, row)| {
            (
                i + offset,
                SparseRow {
                    entries: row.entries.iter().map(|&(j, v)| (j + offset, v)).collect(),
                    constant: row.constant,
                },
            )
        })
        .collect();
    let mut lifted = Reset::from_rows(total, rows)?;
    if let Some(res) = &r.residual {
        let eval = res.eval.clone();
        let interval = res.interval.clone();
        lifted = lifted.with_residual(ResetResidual {
            label: res.label.clone(),
            eval: Arc::new(move |pre: &DVector<f64>, post: &mut DVector<f64>| {
                let pre_l = pre.rows(offset, n).into_owned();
                let mut post_l = post.rows(offset, n).into_owned();
                eval(&pre_l, &mut post_l);
                for j in 0..n {
                    post[offset + j] = post_l[j];
                }
            }),
            interval: Arc::new(move |lo: &DVector<f64>, hi: &DVector<f64>| {
                let lo_l = lo.rows(offset, n).into_owned();
                let hi_l = hi.rows(offset, n).into_owned();
                interval(&lo_l, &hi_l)
                    .into_iter()
                    .map(|(c, l, h)| (c + offset, l, h))
                    .collect()
            }),
        });
    }
    Ok(lifted)
}

impl Component for ExplicitComponent {
    fn name(&self) -> &str {
        &self.aut.name
    }

    fn init_seg(&self) -> Vec<u16> {
        let (m, _) = self.aut.init_sets().first().expect("component has an initial mode");
        vec![*m as u16]
    }

    fn init_bounds(&self) -> Vec<(usize, f64, f64)> {
        let (_, set) = self.aut.init_sets().first().expect("component has an initial mode");
        let (lo, hi) = set
            .as_box()
            .expect("composition requires box-shaped initial sets");
        (0..lo.len()).map(|i| (self.offset + i, lo[i], hi[i])).collect()
    }

    fn mode_name(&self, seg: &[u16]) -> String {
        self.aut.mode_def(self.mode(seg)).name.clone()
    }

    fn flow_into(&self, seg: &[u16], flow: &mut ProductFlow) {
        let o = self.offset;
        match &self.aut.mode_def(self.mode(seg)).flow {
            FlowSpec::LinearOde { a, b } => {
                for i in 0..a.nrows() {
                    let entries: Vec<(usize, f64)> = (0..a.ncols())
                        .filter(|&j| a[(i, j)] != 0.0)
                        .map(|j| (o + j, a[(i, j)]))
                        .collect();
                    if !entries.is_empty() || b[i] != 0.0 {
                        flow.set_row(o + i, SparseRow { entries, constant: b[i] });
                    }
                }
            }
            FlowSpec::Clock { rates } => {
                for i in 0..rates.len() {
                    if rates[i] != 0.0 {
                        flow.set_rate(o + i, rates[i]);
                    }
                }
            }
            FlowSpec::Constant { .. } => {}
            FlowSpec::ThresholdDecay { rates, decay } => {
                for i in 0..rates.len() {
                    if i != decay.coord && rates[i] != 0.0 {
                        flow.set_rate(o + i, rates[i]);
                    }
                }
                flow.add_decay(DecayRow {
                    coord: o + decay.coord,
                    ef: o + decay.ef,
                    tc: decay.tc,
                    floor: decay.floor,
                });
            }
            FlowSpec::Sparse(s) => {
                for (i, row) in s.rows.iter().enumerate() {
                    if !row.entries.is_empty() || row.constant != 0.0 {
                        flow.set_row(
                            o + i,
                            SparseRow {
                                entries: row.entries.iter().map(|&(j, v)| (o + j, v)).collect(),
                                constant: row.constant,
                            },
                        );
                    }
                }
                for d in &s.decays {
                    flow.add_decay(DecayRow { coord: o + d.coord, ef: o + d.ef, tc: d.tc, floor: d.floor });
                }
                flow.note_max_step(s.max_step);
            }
        }
    }

    fn invariant_rows(&self, seg: &[u16]) -> Vec<(SparseRow, f64)> {
        let Some(inv) = &self.aut.mode_def(self.mode(seg)).invariant else {
            return vec![];
        };
        (0..inv.nrows())
            .map(|i| {
                let entries: Vec<(usize, f64)> = (0..inv.dim())
                    .filter(|&j| inv.a()[(i, j)] != 0.0)
                    .map(|j| (self.offset + j, inv.a()[(i, j)]))
                    .collect();
                (SparseRow { entries, constant: 0.0 }, inv.b()[i])
            })
            .collect()
    }

    fn local_edges(&self, seg: &[u16]) -> Vec<Arc<ComponentEdge>> {
        self.local[self.mode(seg)].clone()
    }

    fn triggered(&self, seg: &[u16], event: &str) -> Vec<Arc<ComponentEdge>> {
        self.trig[self.mode(seg)].get(event).cloned().unwrap_or_default()
    }

    fn can_emit(&self) -> Vec<String> {
        self.emits.clone()
    }

    fn listens_to(&self) -> Vec<String> {
        self.listens.clone()
    }

    fn is_terminal(&self, seg: &[u16]) -> bool {
        self.aut.is_terminal_mode(self.mode(seg))
    }

    fn enumerate_segs(&self) -> Option<Vec<Vec<u16>>> {
        Some((0..self.aut.n_modes()).map(|m| vec![m as u16]).collect())
    }
}

/// Lazy parallel composition of explicit automata. Coordinates are renamed
/// `component.coordinate`; events are matched by name across components.
pub fn compose_lazy(name: &str, parts: &[&HybridAutomaton]) -> Result<ProductAutomaton> {
    let mut b = ProductBuilder::new(name);
    let mut offsets = Vec::with_capacity(parts.len());
    for a in parts {
        let names = a.coord_names();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        offsets.push(b.alloc(&a.name, &refs)?);
    }
    let total = b.dim();
    for (a, off) in parts.iter().zip(&offsets) {
        b.add_component(Box::new(ExplicitComponent::new(Arc::new((*a).clone()), *off, total)?));
    }
    b.build()
}

/// Eager composition into an explicit automaton, expanding only the modes
/// reachable from the initial mode. Fails once more than `cap` modes appear.
pub fn compose(name: &str, parts: &[&HybridAutomaton], cap: usize) -> Result<HybridAutomaton> {
    compose_lazy(name, parts)?.materialize(cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::EdgeDef;
    use crate::simulate::{simulate, SimConfig};
    use nalgebra::dvector;

    fn ticker(name: &str, period: f64, emit: Option<&str>) -> HybridAutomaton {
        let mut a = HybridAutomaton::new(name, 1, vec!["x".into()]).unwrap();
        let run = a.add_mode("run", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        a.add_edge(EdgeDef {
            src: run,
            dst: run,
            guard: Guard::halfspace(1, &[(0, -1.0)], -period),
            reset: Reset::identity(1).assign_const(0, 0.0),
            label: "tick".into(),
            emits: emit.map(|e| vec![e.to_string()]).unwrap_or_default(),
            trigger: None,
        })
        .unwrap();
        a.set_init(run, Polytope::singleton(&dvector![0.0])).unwrap();
        a
    }

    fn counter(name: &str, event: &str, limit: Option<f64>) -> HybridAutomaton {
        let mut a = HybridAutomaton::new(name, 1, vec!["y".into()]).unwrap();
        let m = a.add_mode("count", FlowSpec::Constant { dim: 1 }, None).unwrap();
        let guard = match limit {
            Some(l) => Guard::halfspace(1, &[(0, 1.0)], l),
            None => Guard::always(1),
        };
        a.add_edge(EdgeDef {
            src: m,
            dst: m,
            guard,
            reset: Reset::identity(1).assign(0, SparseRow { entries: vec![(0, 1.0)], constant: 1.0 }),
            label: "bump".into(),
            emits: vec![],
            trigger: Some(event.into()),
        })
        .unwrap();
        a.set_init(m, Polytope::singleton(&dvector![0.0])).unwrap();
        a
    }

    #[test]
    fn independent_tickers_interleave() {
        let t1 = ticker("fast", 1.0, None);
        let t2 = ticker("slow", 1.5, None);
        let prod = compose("pair", &[&t1, &t2], 16).unwrap();
        assert_eq!(prod.n_modes(), 1);
        let cfg = SimConfig { duration: 6.05, dt: 0.01, ..Default::default() };
        let exec = simulate(&prod, &cfg).unwrap();
        assert_eq!(exec.jump_count(), 10);
    }

    #[test]
    fn emitted_event_drives_listener_inside_one_jump() {
        let t = ticker("clock", 1.0, Some("tick"));
        let c = counter("tally", "tick", None);
        let prod = compose("loop", &[&t, &c], 16).unwrap();
        let cfg = SimConfig { duration: 4.5, dt: 0.01, ..Default::default() };
        let exec = simulate(&prod, &cfg).unwrap();
        assert_eq!(exec.jump_count(), 4);
        let end = exec.final_point();
        assert!((end.x[1] - 4.0).abs() < 1e-12);
        assert!(exec.jumps.iter().all(|j| j.label.contains("clock.tick") && j.label.contains("tally.bump")));
    }

    #[test]
    fn lazy_and_materialized_products_agree() {
        let t = ticker("clock", 1.0, Some("tick"));
        let c = counter("tally", "tick", Some(2.5));
        let lazy = compose_lazy("loop", &[&t, &c]).unwrap();
        let eager = lazy.materialize(16).unwrap();
        let cfg = SimConfig { duration: 6.5, dt: 0.01, ..Default::default() };
        let e1 = simulate(&lazy, &cfg).unwrap();
        let e2 = simulate(&eager, &cfg).unwrap();
        assert_eq!(e1.jump_count(), e2.jump_count());
        // The counter saturates at 3 in both semantics.
        assert!((e1.final_point().x[1] - 3.0).abs() < 1e-12);
        assert!((e2.final_point().x[1] - 3.0).abs() < 1e-12);
        let times1: Vec<f64> = e1.jumps.iter().map(|j| j.t).collect();
        let times2: Vec<f64> = e2.jumps.iter().map(|j| j.t).collect();
        for (a, b) in times1.iter().zip(&times2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn conditional_listener_materializes_both_variants() {
        let t = ticker("clock", 1.0, Some("tick"));
        let c = counter("tally", "tick", Some(2.5));
        let eager = compose("loop", &[&t, &c], 16).unwrap();
        // One product mode, two edge variants: with and without the bump.
        assert_eq!(eager.n_modes(), 1);
        assert_eq!(eager.edge_defs().len(), 2);
    }

    #[test]
    fn cascade_synchronizes_three_components() {
        let t = ticker("clock", 1.0, Some("a"));
        let mut relay = HybridAutomaton::new("relay", 1, vec!["r".into()]).unwrap();
        let m = relay.add_mode("idle", FlowSpec::Constant { dim: 1 }, None).unwrap();
        relay
            .add_edge(EdgeDef {
                src: m,
                dst: m,
                guard: Guard::always(1),
                reset: Reset::identity(1).assign(0, SparseRow { entries: vec![(0, 1.0)], constant: 1.0 }),
                label: "fwd".into(),
                emits: vec!["b".into()],
                trigger: Some("a".into()),
            })
            .unwrap();
        relay.set_init(m, Polytope::singleton(&dvector![0.0])).unwrap();
        let c = counter("tally", "b", None);
        let prod = compose("chain", &[&t, &relay, &c], 16).unwrap();
        let cfg = SimConfig { duration: 3.5, dt: 0.01, ..Default::default() };
        let exec = simulate(&prod, &cfg).unwrap();
        assert_eq!(exec.jump_count(), 3);
        let end = exec.final_point();
        assert!((end.x[1] - 3.0).abs() < 1e-12, "relay count");
        assert!((end.x[2] - 3.0).abs() < 1e-12, "tally count");
    }

    #[test]
    fn coordinate_names_are_prefixed() {
        let t1 = ticker("fast", 1.0, None);
        let t2 = ticker("slow", 1.5, None);
        let prod = compose_lazy("pair", &[&t1, &t2]).unwrap();
        assert_eq!(prod.coord_names(), vec!["fast.x".to_string(), "slow.x".to_string()]);
    }

    #[test]
    fn duplicate_component_names_rejected() {
        let t1 = ticker("t", 1.0, None);
        let t2 = ticker("t", 1.5, None);
        assert!(compose_lazy("pair", &[&t1, &t2]).is_err());
    }
}
