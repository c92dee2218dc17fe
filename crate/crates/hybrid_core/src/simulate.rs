//! Numeric execution of hybrid automata under urgent-transition semantics.
//!
//! Transitions fire as soon as their guard becomes true. Guard entry times
//! are bisected to a configurable tolerance; several edges enabled at one
//! instant are ordered deterministically by destination-mode name and label,
//! with the tie recorded. Events emitted by a jump are visible to triggered
//! edges during the same instant.

use crate::automaton::{Automaton, EdgeInstance, ModeKey};
use crate::error::{HybridError, Result};
use crate::flow::{flow_with_scratch, FlowScratch, FlowSpec};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use setgeom::Polytope;
use std::sync::Arc;

/// A concrete hybrid state: discrete mode plus continuous valuation.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    pub mode: ModeKey,
    pub x: DVector<f64>,
}

/// Simulation parameters.
#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Time horizon.
    pub duration: f64,
    /// Outer sampling step; guards are checked at least this often.
    pub dt: f64,
    /// Execution ends (without error) after this many jumps.
    pub max_jumps: usize,
    /// Hard bound on jumps taken at a single instant before declaring the
    /// execution Zeno.
    pub max_chain: usize,
    /// Guard entry times are located to this tolerance.
    pub bisect_tol: f64,
    /// Slack for guard and invariant membership tests.
    pub guard_tol: f64,
    /// Record every n-th continuous sample (1 = all).
    pub record_every: usize,
    /// Store pre/post states in jump records and force post-jump trace
    /// points. Disable for very long high-dimensional runs.
    pub record_jump_states: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 10.0,
            dt: 1e-3,
            max_jumps: 1_000_000,
            max_chain: 64,
            bisect_tol: 1e-9,
            guard_tol: 1e-9,
            record_every: 1,
            record_jump_states: true,
        }
    }
}

/// Exogenous override of one coordinate: after every committed state the
/// coordinate is replaced by `f(t)`.
#[derive(Clone)]
pub struct InputSignal {
    pub coord: usize,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// External stimuli: coordinate overrides and timed event injections.
#[derive(Clone, Default)]
pub struct SimInputs {
    pub signals: Vec<InputSignal>,
    /// `(time, event)` pairs; delivered when the simulation reaches `time`.
    pub events: Vec<(f64, String)>,
}

/// Observes committed continuous samples and may raise events, which can fire
/// triggered edges at that instant. Used for detectors that need trajectory
/// history, such as sampled peak detection.
pub trait Monitor: Send {
    fn observe(&mut self, t: f64, mode: &ModeKey, x: &DVector<f64>) -> Vec<String>;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub mode: ModeKey,
    pub x: DVector<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    pub label: String,
    pub src: ModeKey,
    pub dst: ModeKey,
    pub pre: Option<DVector<f64>>,
    pub post: Option<DVector<f64>>,
    pub events: Vec<String>,
}

/// Several distinct transitions were enabled at one instant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ambiguity {
    pub t: f64,
    pub chosen: String,
    pub also: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    Horizon,
    Terminal,
    JumpBudget,
    InvariantExit,
}

/// A finished run: sampled trace, jump log, emitted events and diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Execution {
    pub trace: Vec<TracePoint>,
    pub jumps: Vec<JumpRecord>,
    pub events: Vec<(f64, String)>,
    pub ambiguities: Vec<Ambiguity>,
    pub ambiguity_count: usize,
    pub end: EndReason,
}

const MAX_AMBIGUITY_RECORDS: usize = 100;
const TIME_EPS: f64 = 1e-12;

impl Execution {
    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// Times at which the named event was emitted.
    pub fn event_times(&self, name: &str) -> Vec<f64> {
        self.events.iter().filter(|(_, e)| e == name).map(|(t, _)| *t).collect()
    }

    pub fn final_point(&self) -> &TracePoint {
        self.trace.last().expect("executions record at least the initial state")
    }
}

/// Runs from the automaton's initial condition with no external stimuli.
pub fn simulate(aut: &dyn Automaton, cfg: &SimConfig) -> Result<Execution> {
    simulate_from(aut, None, cfg, SimInputs::default(), &mut [])
}

/// Full-control entry point: explicit start state, inputs and monitors.
pub fn simulate_from(
    aut: &dyn Automaton,
    init: Option<HybridState>,
    cfg: &SimConfig,
    inputs: SimInputs,
    monitors: &mut [Box<dyn Monitor>],
) -> Result<Execution> {
    if cfg.dt <= 0.0 || cfg.duration < 0.0 || cfg.record_every == 0 {
        return Err(HybridError::InvalidModel("simulation config must have dt > 0, duration >= 0, record_every >= 1".into()));
    }
    let state = match init {
        Some(s) => s,
        None => default_init(aut)?,
    };
    if state.x.len() != aut.dim() {
        return Err(HybridError::DimensionMismatch { expected: aut.dim(), got: state.x.len() });
    }

    let mut events = inputs.events.clone();
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("event times are ordered"));
    let signals = inputs.signals;

    let mut t = 0.0;
    let mut mode = state.mode;
    let mut x = state.x;
    apply_signals(&signals, t, &mut x);

    let mut flow_spec = aut.flow(&mode);
    let mut edges = aut.edges_from(&mode);
    let mut invariant = aut.invariant(&mode);
    let mut scratch = FlowScratch::default();

    let mut exec = Execution {
        trace: vec![TracePoint { t, mode: mode.clone(), x: x.clone() }],
        jumps: Vec::new(),
        events: Vec::new(),
        ambiguities: Vec::new(),
        ambiguity_count: 0,
        end: EndReason::Horizon,
    };

    let mut ev_idx = 0usize;
    let mut pending: Vec<String> = Vec::new();
    let mut sample_counter = 0usize;

    'outer: loop {
        while ev_idx < events.len() && events[ev_idx].0 <= t + TIME_EPS {
            pending.push(events[ev_idx].1.clone());
            ev_idx += 1;
        }

        // Zero-time phase: fire urgent transitions at the current instant.
        let mut chain = 0usize;
        loop {
            if exec.jumps.len() >= cfg.max_jumps {
                exec.end = EndReason::JumpBudget;
                break 'outer;
            }
            let Some((edge_idx, mask, dst, ties)) =
                pick_transition(aut, &edges, &mode, &x, &pending, cfg.guard_tol)
            else {
                break;
            };
            chain += 1;
            if chain > cfg.max_chain {
                return Err(HybridError::Zeno(chain, t));
            }
            let edge = &edges[edge_idx];
            if !ties.is_empty() {
                exec.ambiguity_count += 1;
                if exec.ambiguities.len() < MAX_AMBIGUITY_RECORDS {
                    exec.ambiguities.push(Ambiguity { t, chosen: edge.label.clone(), also: ties });
                }
            }
            let mut post = x.clone();
            let mut raised = Vec::new();
            for (pi, part) in edge.parts.iter().enumerate() {
                if mask[pi] {
                    apply_reset(&part.reset, &x, &mut post);
                    raised.extend(part.emits.iter().cloned());
                }
            }
            apply_signals(&signals, t, &mut post);
            for ev in &raised {
                exec.events.push((t, ev.clone()));
                pending.push(ev.clone());
            }
            exec.jumps.push(JumpRecord {
                t,
                label: edge.label.clone(),
                src: mode.clone(),
                dst: dst.clone(),
                pre: cfg.record_jump_states.then(|| x.clone()),
                post: cfg.record_jump_states.then(|| post.clone()),
                events: raised,
            });
            x = post;
            mode = dst;
            flow_spec = aut.flow(&mode);
            edges = aut.edges_from(&mode);
            invariant = aut.invariant(&mode);
            if cfg.record_jump_states {
                exec.trace.push(TracePoint { t, mode: mode.clone(), x: x.clone() });
            }
        }
        pending.clear();

        if aut.is_terminal(&mode) {
            exec.end = EndReason::Terminal;
            break;
        }
        if t >= cfg.duration - TIME_EPS {
            exec.end = EndReason::Horizon;
            break;
        }
        if let Some(inv) = &invariant {
            if inv.violation(&x) > cfg.guard_tol {
                exec.end = EndReason::InvariantExit;
                break;
            }
        }

        // Continuous phase: advance to the next barrier or guard crossing.
        let next_event_t = events.get(ev_idx).map(|(et, _)| *et).unwrap_or(f64::INFINITY);
        let t_target = (t + cfg.dt).min(cfg.duration).min(next_event_t);
        let h = t_target - t;
        let x_try = advance(&flow_spec, &x, h, t, &signals, &mut scratch)?;

        let mut tau_star = f64::INFINITY;
        for e in &edges {
            if e.trigger.is_some() {
                continue;
            }
            if e.guard.poly.violation(&x) <= cfg.guard_tol {
                // Already inside the polytope: a false residual is re-sampled
                // at committed boundaries, not bisected.
                continue;
            }
            if e.guard.poly.violation(&x_try) <= cfg.guard_tol {
                let tau = bisect_entry(&flow_spec, &x, h, t, &signals, &e.guard.poly, cfg, &mut scratch)?;
                tau_star = tau_star.min(tau);
            }
        }

        let mut tau_inv = f64::INFINITY;
        if let Some(inv) = &invariant {
            if inv.violation(&x_try) > cfg.guard_tol {
                tau_inv = bisect_exit(&flow_spec, &x, h, t, &signals, inv, cfg, &mut scratch)?;
            }
        }

        if tau_star.is_finite() && tau_star <= tau_inv {
            t += tau_star;
            x = advance(&flow_spec, &x, tau_star, t - tau_star, &signals, &mut scratch)?;
            exec.trace.push(TracePoint { t, mode: mode.clone(), x: x.clone() });
        } else if tau_inv.is_finite() {
            t += tau_inv;
            x = advance(&flow_spec, &x, tau_inv, t - tau_inv, &signals, &mut scratch)?;
            exec.trace.push(TracePoint { t, mode: mode.clone(), x: x.clone() });
            exec.end = EndReason::InvariantExit;
            break;
        } else {
            t = t_target;
            x = x_try;
            sample_counter += 1;
            if sample_counter % cfg.record_every == 0 {
                exec.trace.push(TracePoint { t, mode: mode.clone(), x: x.clone() });
            }
        }

        for m in monitors.iter_mut() {
            for ev in m.observe(t, &mode, &x) {
                exec.events.push((t, ev.clone()));
                pending.push(ev);
            }
        }
    }

    let last_recorded = exec.trace.last().map(|p| p.t).unwrap_or(f64::NEG_INFINITY);
    if (t - last_recorded).abs() > TIME_EPS || exec.trace.is_empty() {
        exec.trace.push(TracePoint { t, mode, x });
    }
    Ok(exec)
}

/// Initial state: the first initial set's canonical point.
fn default_init(aut: &dyn Automaton) -> Result<HybridState> {
    let inits = aut.initial();
    let (mode, set) = inits
        .first()
        .ok_or_else(|| HybridError::InvalidModel("automaton has no initial condition".into()))?;
    let x = initial_point(set)
        .ok_or_else(|| HybridError::InvalidModel("initial set is empty".into()))?;
    Ok(HybridState { mode: mode.clone(), x })
}

/// A representative point of a set: box midpoint when the set is a box,
/// otherwise the Chebyshev center.
pub fn initial_point(set: &Polytope) -> Option<DVector<f64>> {
    if let Some((lo, hi)) = set.as_box() {
        return Some((lo + hi) / 2.0);
    }
    set.center()
}

fn apply_signals(signals: &[InputSignal], t: f64, x: &mut DVector<f64>) {
    for s in signals {
        x[s.coord] = (s.f)(t);
    }
}

fn advance(
    spec: &FlowSpec,
    x: &DVector<f64>,
    tau: f64,
    t0: f64,
    signals: &[InputSignal],
    scratch: &mut FlowScratch,
) -> Result<DVector<f64>> {
    let mut y = flow_with_scratch(spec, x, tau, scratch)?;
    apply_signals(signals, t0 + tau, &mut y);
    Ok(y)
}

fn apply_reset(reset: &crate::guard::Reset, pre: &DVector<f64>, post: &mut DVector<f64>) {
    for (i, row) in reset.rows() {
        post[*i] = row.eval(pre);
    }
    if let Some(r) = &reset.residual {
        (r.eval)(pre, post);
    }
}

/// Chooses the transition to fire at the current instant, if any. Returns the
/// edge index, the participation mask over its parts, the destination mode
/// and the labels of tied alternatives.
#[allow(clippy::type_complexity)]
fn pick_transition(
    aut: &dyn Automaton,
    edges: &[EdgeInstance],
    mode: &ModeKey,
    x: &DVector<f64>,
    pending: &[String],
    tol: f64,
) -> Option<(usize, Vec<bool>, ModeKey, Vec<String>)> {
    let mut candidates: Vec<(usize, Vec<bool>, ModeKey, String)> = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        if let Some(ev) = &e.trigger {
            if !pending.iter().any(|p| p == ev) {
                continue;
            }
        }
        if !e.guard.satisfied(x, tol) {
            continue;
        }
        let mask = e.participation(|pi| {
            e.parts[pi].condition.as_ref().map_or(true, |c| c.satisfied(x, tol))
        });
        let dst = e.dst_mode(mode, &mask);
        let sort_name = aut.mode_name(&dst);
        candidates.push((i, mask, dst, sort_name));
    }
    if candidates.is_empty() {
        return None;
    }
    candidates.sort_by(|a, b| {
        (&a.3, &edges[a.0].label).cmp(&(&b.3, &edges[b.0].label))
    });
    let ties: Vec<String> = candidates[1..]
        .iter()
        .filter(|(i, _, dst, _)| {
            let e0 = &candidates[0];
            *dst != e0.2 || edges[*i].label != edges[e0.0].label
        })
        .map(|(i, _, _, _)| edges[*i].label.clone())
        .collect();
    let (i, mask, dst, _) = candidates.swap_remove(0);
    Some((i, mask, dst, ties))
}

/// Earliest time in `(0, h]` at which the polytope becomes satisfied, given
/// it is violated at 0 and satisfied at `h`.
#[allow(clippy::too_many_arguments)]
fn bisect_entry(
    spec: &FlowSpec,
    x: &DVector<f64>,
    h: f64,
    t0: f64,
    signals: &[InputSignal],
    poly: &Polytope,
    cfg: &SimConfig,
    scratch: &mut FlowScratch,
) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = h;
    while hi - lo > cfg.bisect_tol {
        let mid = 0.5 * (lo + hi);
        let y = advance(spec, x, mid, t0, signals, scratch)?;
        if poly.violation(&y) <= cfg.guard_tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Latest time in `[0, h)` still inside the polytope, given inside at 0 and
/// outside at `h`.
#[allow(clippy::too_many_arguments)]
fn bisect_exit(
    spec: &FlowSpec,
    x: &DVector<f64>,
    h: f64,
    t0: f64,
    signals: &[InputSignal],
    poly: &Polytope,
    cfg: &SimConfig,
    scratch: &mut FlowScratch,
) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = h;
    while hi - lo > cfg.bisect_tol {
        let mid = 0.5 * (lo + hi);
        let y = advance(spec, x, mid, t0, signals, scratch)?;
        if poly.violation(&y) <= cfg.guard_tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{EdgeDef, HybridAutomaton};
    use crate::guard::{Guard, Reset};
    use nalgebra::dvector;

    fn ticker() -> HybridAutomaton {
        let mut a = HybridAutomaton::new("ticker", 1, vec!["x".into()]).unwrap();
        let run = a.add_mode("run", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        a.add_edge(EdgeDef {
            src: run,
            dst: run,
            guard: Guard::halfspace(1, &[(0, -1.0)], -1.0),
            reset: Reset::identity(1).assign_const(0, 0.0),
            label: "tick".into(),
            emits: vec!["tick".into()],
            trigger: None,
        })
        .unwrap();
        a.set_init(run, Polytope::singleton(&dvector![0.0])).unwrap();
        a
    }

    #[test]
    fn periodic_reset_jump_times() {
        let a = ticker();
        let cfg = SimConfig { duration: 10.05, dt: 0.01, ..Default::default() };
        let exec = simulate(&a, &cfg).unwrap();
        assert_eq!(exec.jump_count(), 10);
        for (k, j) in exec.jumps.iter().enumerate() {
            assert!((j.t - (k + 1) as f64).abs() < 1e-6, "jump {k} at {}", j.t);
            assert!(j.pre.as_ref().unwrap()[0] >= 1.0 - 1e-6);
            assert!(j.post.as_ref().unwrap()[0].abs() < 1e-12);
        }
        assert_eq!(exec.event_times("tick").len(), 10);
        let end = exec.final_point();
        assert!((end.t - 10.05).abs() < 1e-9);
        assert!((end.x[0] - 0.05).abs() < 1e-6);
        assert_eq!(exec.end, EndReason::Horizon);
    }

    #[test]
    fn thermostat_switches_near_setpoints() {
        let mut a = HybridAutomaton::new("thermostat", 1, vec!["temp".into()]).unwrap();
        let heat = a
            .add_mode(
                "heat",
                FlowSpec::LinearOde { a: nalgebra::dmatrix![-1.0], b: dvector![30.0] },
                None,
            )
            .unwrap();
        let cool = a
            .add_mode(
                "cool",
                FlowSpec::LinearOde { a: nalgebra::dmatrix![-1.0], b: dvector![10.0] },
                None,
            )
            .unwrap();
        a.add_edge(EdgeDef {
            src: heat,
            dst: cool,
            guard: Guard::halfspace(1, &[(0, -1.0)], -22.0),
            reset: Reset::identity(1),
            label: "hot".into(),
            emits: vec![],
            trigger: None,
        })
        .unwrap();
        a.add_edge(EdgeDef {
            src: cool,
            dst: heat,
            guard: Guard::halfspace(1, &[(0, 1.0)], 20.0),
            reset: Reset::identity(1),
            label: "cold".into(),
            emits: vec![],
            trigger: None,
        })
        .unwrap();
        a.set_init(heat, Polytope::singleton(&dvector![18.0])).unwrap();
        let cfg = SimConfig { duration: 5.0, dt: 0.01, ..Default::default() };
        let exec = simulate(&a, &cfg).unwrap();
        assert!(exec.jump_count() >= 3);
        for j in &exec.jumps {
            let pre = j.pre.as_ref().unwrap()[0];
            if j.label == "hot" {
                assert!((pre - 22.0).abs() < 1e-6);
            } else {
                assert!((pre - 20.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn urgent_edge_fires_at_start() {
        let a = ticker();
        let init = HybridState { mode: ModeKey::flat(0), x: dvector![5.0] };
        let cfg = SimConfig { duration: 0.5, dt: 0.1, ..Default::default() };
        let exec = simulate_from(&a, Some(init), &cfg, SimInputs::default(), &mut []).unwrap();
        assert!(exec.jumps[0].t.abs() < 1e-12);
        assert!(exec.jumps[0].post.as_ref().unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn simultaneous_edges_pick_lex_smallest_and_report() {
        let mut a = HybridAutomaton::new("fork", 1, vec![]).unwrap();
        let s = a.add_mode("start", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        let m_b = a.add_mode("b_sink", FlowSpec::Constant { dim: 1 }, None).unwrap();
        let m_a = a.add_mode("a_sink", FlowSpec::Constant { dim: 1 }, None).unwrap();
        for (dst, label) in [(m_b, "to_b"), (m_a, "to_a")] {
            a.add_edge(EdgeDef {
                src: s,
                dst,
                guard: Guard::halfspace(1, &[(0, -1.0)], -1.0),
                reset: Reset::identity(1),
                label: label.into(),
                emits: vec![],
                trigger: None,
            })
            .unwrap();
        }
        a.mark_terminal(m_a).unwrap();
        a.mark_terminal(m_b).unwrap();
        a.set_init(s, Polytope::singleton(&dvector![0.0])).unwrap();
        let exec = simulate(&a, &SimConfig { duration: 3.0, dt: 0.05, ..Default::default() }).unwrap();
        assert_eq!(exec.jump_count(), 1);
        assert_eq!(exec.jumps[0].label, "to_a");
        assert_eq!(exec.ambiguity_count, 1);
        assert_eq!(exec.ambiguities[0].also, vec!["to_b".to_string()]);
        assert_eq!(exec.end, EndReason::Terminal);
    }

    #[test]
    fn zeno_loop_is_an_error() {
        let mut a = HybridAutomaton::new("zeno", 1, vec![]).unwrap();
        let m = a.add_mode("m", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        a.add_edge(EdgeDef {
            src: m,
            dst: m,
            guard: Guard::always(1),
            reset: Reset::identity(1),
            label: "spin".into(),
            emits: vec![],
            trigger: None,
        })
        .unwrap();
        a.set_init(m, Polytope::singleton(&dvector![0.0])).unwrap();
        match simulate(&a, &SimConfig::default()) {
            Err(HybridError::Zeno(_, _)) => {}
            other => panic!("expected Zeno, got {other:?}"),
        }
    }

    #[test]
    fn jump_budget_ends_cleanly() {
        let a = ticker();
        let cfg = SimConfig { duration: 100.0, dt: 0.01, max_jumps: 3, ..Default::default() };
        let exec = simulate(&a, &cfg).unwrap();
        assert_eq!(exec.jump_count(), 3);
        assert_eq!(exec.end, EndReason::JumpBudget);
    }

    #[test]
    fn injected_event_fires_triggered_edge() {
        let mut a = HybridAutomaton::new("listener", 1, vec![]).unwrap();
        let idle = a.add_mode("idle", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        let done = a.add_mode("done", FlowSpec::Constant { dim: 1 }, None).unwrap();
        a.add_edge(EdgeDef {
            src: idle,
            dst: done,
            guard: Guard::always(1),
            reset: Reset::identity(1),
            label: "react".into(),
            emits: vec![],
            trigger: Some("go".into()),
        })
        .unwrap();
        a.set_init(idle, Polytope::singleton(&dvector![0.0])).unwrap();
        let inputs = SimInputs { signals: vec![], events: vec![(0.5, "go".into())] };
        let cfg = SimConfig { duration: 2.0, dt: 0.05, ..Default::default() };
        let exec = simulate_from(&a, None, &cfg, inputs, &mut []).unwrap();
        assert_eq!(exec.jump_count(), 1);
        assert!((exec.jumps[0].t - 0.5).abs() < 1e-9);
        assert!((exec.jumps[0].pre.as_ref().unwrap()[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn triggered_edge_needs_its_guard_too() {
        let mut a = HybridAutomaton::new("gated", 1, vec![]).unwrap();
        let idle = a.add_mode("idle", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        let done = a.add_mode("done", FlowSpec::Constant { dim: 1 }, None).unwrap();
        a.add_edge(EdgeDef {
            src: idle,
            dst: done,
            guard: Guard::halfspace(1, &[(0, -1.0)], -10.0),
            reset: Reset::identity(1),
            label: "react".into(),
            emits: vec![],
            trigger: Some("go".into()),
        })
        .unwrap();
        a.set_init(idle, Polytope::singleton(&dvector![0.0])).unwrap();
        let inputs = SimInputs { signals: vec![], events: vec![(0.5, "go".into())] };
        let cfg = SimConfig { duration: 2.0, dt: 0.05, ..Default::default() };
        let exec = simulate_from(&a, None, &cfg, inputs, &mut []).unwrap();
        assert_eq!(exec.jump_count(), 0);
    }

    #[test]
    fn input_signal_overrides_coordinate() {
        let mut a = HybridAutomaton::new("driven", 2, vec!["t".into(), "y".into()]).unwrap();
        let m = a.add_mode("m", FlowSpec::Clock { rates: dvector![1.0, 0.0] }, None).unwrap();
        a.set_init(m, Polytope::singleton(&dvector![0.0, 0.0])).unwrap();
        let inputs = SimInputs {
            signals: vec![InputSignal { coord: 1, f: Arc::new(|t: f64| (2.0 * t).sin()) }],
            events: vec![],
        };
        let cfg = SimConfig { duration: 1.0, dt: 0.1, ..Default::default() };
        let exec = simulate_from(&a, None, &cfg, inputs, &mut []).unwrap();
        let end = exec.final_point();
        assert!((end.x[0] - 1.0).abs() < 1e-9);
        assert!((end.x[1] - (2.0f64).sin()).abs() < 1e-12);
    }

    #[test]
    fn monitor_event_drives_jump() {
        struct LevelWatch {
            fired: bool,
        }
        impl Monitor for LevelWatch {
            fn observe(&mut self, _t: f64, _m: &ModeKey, x: &DVector<f64>) -> Vec<String> {
                if !self.fired && x[0] >= 2.0 {
                    self.fired = true;
                    vec!["go".into()]
                } else {
                    vec![]
                }
            }
        }
        let mut a = HybridAutomaton::new("watched", 1, vec![]).unwrap();
        let idle = a.add_mode("idle", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        let done = a.add_mode("done", FlowSpec::Constant { dim: 1 }, None).unwrap();
        a.add_edge(EdgeDef {
            src: idle,
            dst: done,
            guard: Guard::always(1),
            reset: Reset::identity(1),
            label: "react".into(),
            emits: vec![],
            trigger: Some("go".into()),
        })
        .unwrap();
        a.set_init(idle, Polytope::singleton(&dvector![0.0])).unwrap();
        let cfg = SimConfig { duration: 5.0, dt: 0.05, ..Default::default() };
        let mut mons: Vec<Box<dyn Monitor>> = vec![Box::new(LevelWatch { fired: false })];
        let exec = simulate_from(&a, None, &cfg, SimInputs::default(), &mut mons).unwrap();
        assert_eq!(exec.jump_count(), 1);
        assert!((exec.jumps[0].t - 2.0).abs() < 0.05 + 1e-9);
    }

    #[test]
    fn invariant_exit_truncates() {
        let mut a = HybridAutomaton::new("bounded", 1, vec![]).unwrap();
        a.add_mode(
            "m",
            FlowSpec::Clock { rates: dvector![1.0] },
            Some(Polytope::halfspace(1, &[(0, 1.0)], 1.0)),
        )
        .unwrap();
        a.set_init(0, Polytope::singleton(&dvector![0.0])).unwrap();
        let cfg = SimConfig { duration: 5.0, dt: 0.1, ..Default::default() };
        let exec = simulate(&a, &cfg).unwrap();
        assert_eq!(exec.end, EndReason::InvariantExit);
        let end = exec.final_point();
        assert!((end.t - 1.0).abs() < 1e-6);
        assert!(end.x[0] <= 1.0 + 1e-9);
    }

    #[test]
    fn guard_residual_is_sampled_at_boundaries() {
        let mut a = HybridAutomaton::new("res", 1, vec![]).unwrap();
        let run = a.add_mode("run", FlowSpec::Clock { rates: dvector![1.0] }, None).unwrap();
        let done = a.add_mode("done", FlowSpec::Constant { dim: 1 }, None).unwrap();
        a.add_edge(EdgeDef {
            src: run,
            dst: done,
            guard: Guard::halfspace(1, &[(0, -1.0)], -1.0)
                .with_residual("past two", |x: &DVector<f64>| x[0] >= 2.0),
            reset: Reset::identity(1),
            label: "go".into(),
            emits: vec![],
            trigger: None,
        })
        .unwrap();
        a.set_init(run, Polytope::singleton(&dvector![0.0])).unwrap();
        let cfg = SimConfig { duration: 5.0, dt: 0.1, ..Default::default() };
        let exec = simulate(&a, &cfg).unwrap();
        assert_eq!(exec.jump_count(), 1);
        let jt = exec.jumps[0].t;
        assert!(jt >= 2.0 - 1e-9 && jt <= 2.0 + 0.1 + 1e-9, "jump at {jt}");
    }

    #[test]
    fn record_every_decimates_but_keeps_endpoints() {
        let a = ticker();
        let cfg = SimConfig { duration: 0.55, dt: 0.01, record_every: 10, ..Default::default() };
        let exec = simulate(&a, &cfg).unwrap();
        assert!(exec.trace.len() < 60);
        assert!((exec.final_point().t - 0.55).abs() < 1e-9);
        assert_eq!(exec.trace[0].t, 0.0);
    }
}
