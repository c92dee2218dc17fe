//! The automaton interface and its explicit finite-mode implementation.

use crate::error::{HybridError, Result};
use crate::flow::FlowSpec;
use crate::guard::{Guard, Reset};
use serde::{Deserialize, Serialize};
use setgeom::Polytope;
use std::fmt;
use std::sync::Arc;

/// Hierarchical discrete-mode address. Explicit automata use a single
/// segment; product automata concatenate their components' segments.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct ModeKey(pub Vec<u16>);

impl ModeKey {
    pub fn flat(i: usize) -> Self {
        ModeKey(vec![i as u16])
    }

    /// The index when the key is a single segment.
    pub fn single(&self) -> Option<usize> {
        if self.0.len() == 1 {
            Some(self.0[0] as usize)
        } else {
            None
        }
    }

    pub fn segments(&self) -> &[u16] {
        &self.0
    }
}

impl fmt::Display for ModeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// One participant in a (possibly synchronized) jump: a reset, the mode
/// segments it rewrites, and an optional participation condition. The first
/// part of an edge is the emitter and is unconditional; listener parts fire
/// only where their condition holds and stay put otherwise.
#[derive(Clone, Debug)]
pub struct JumpPart {
    pub condition: Option<Arc<Guard>>,
    pub reset: Arc<Reset>,
    /// First slot of the mode-key range this part rewrites.
    pub seg_start: usize,
    pub dst_seg: Vec<u16>,
    pub emits: Vec<String>,
    /// Human-readable origin, used in jump records.
    pub label: String,
}

/// An enabled-transition template out of a concrete mode.
#[derive(Clone, Debug)]
pub struct EdgeInstance {
    pub label: String,
    /// `None` for autonomous edges; `Some(event)` for edges that fire only
    /// when the named event is raised at the current instant.
    pub trigger: Option<String>,
    pub guard: Arc<Guard>,
    pub parts: Vec<JumpPart>,
}

impl EdgeInstance {
    /// Destination mode when exactly the flagged parts participate.
    /// `participating` must be as long as `parts`; the emitter slot is
    /// ignored and always applies.
    pub fn dst_mode(&self, current: &ModeKey, participating: &[bool]) -> ModeKey {
        let mut segs = current.0.clone();
        for (idx, part) in self.parts.iter().enumerate() {
            if idx == 0 || participating[idx] {
                segs[part.seg_start..part.seg_start + part.dst_seg.len()]
                    .copy_from_slice(&part.dst_seg);
            }
        }
        ModeKey(segs)
    }

    /// Participation mask given which conditions hold at the jump state.
    /// Parts are taken in order; alternative parts for one mode segment are
    /// mutually exclusive, the first applicable wins.
    pub fn participation(&self, cond_holds: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut mask = vec![false; self.parts.len()];
        let mut claimed: Vec<usize> = Vec::new();
        for (idx, part) in self.parts.iter().enumerate() {
            let free = !claimed.contains(&part.seg_start);
            let ok = if idx == 0 {
                true
            } else {
                free && (part.condition.is_none() || cond_holds(idx))
            };
            if ok {
                mask[idx] = true;
                claimed.push(part.seg_start);
            }
        }
        mask
    }

    /// Destination mode when every condition holds.
    pub fn dst_mode_full(&self, current: &ModeKey) -> ModeKey {
        let mask = self.participation(|_| true);
        self.dst_mode(current, &mask)
    }
}

/// A hybrid automaton as consumed by the simulator and the analyses. The
/// interface is lazy so products with astronomically many modes can expose
/// only what an execution visits.
pub trait Automaton: Send + Sync {
    fn dim(&self) -> usize;
    fn coord_names(&self) -> Vec<String>;
    /// Initial modes with their initial state sets.
    fn initial(&self) -> Vec<(ModeKey, Polytope)>;
    fn mode_name(&self, m: &ModeKey) -> String;
    fn flow(&self, m: &ModeKey) -> FlowSpec;
    fn invariant(&self, _m: &ModeKey) -> Option<Polytope> {
        None
    }
    fn edges_from(&self, m: &ModeKey) -> Vec<EdgeInstance>;
    /// Terminal modes end executions.
    fn is_terminal(&self, _m: &ModeKey) -> bool {
        false
    }
    /// Full mode enumeration when tractable.
    fn modes(&self) -> Option<Vec<ModeKey>> {
        None
    }
}

/// A mode of an explicit automaton.
#[derive(Clone, Debug)]
pub struct ModeDef {
    pub name: String,
    pub flow: FlowSpec,
    pub invariant: Option<Polytope>,
}

/// An edge of an explicit automaton.
#[derive(Clone, Debug)]
pub struct EdgeDef {
    pub src: usize,
    pub dst: usize,
    pub guard: Guard,
    pub reset: Reset,
    pub label: String,
    pub emits: Vec<String>,
    pub trigger: Option<String>,
}

/// Finite-mode hybrid automaton with explicit mode and edge tables.
#[derive(Clone, Debug)]
pub struct HybridAutomaton {
    pub name: String,
    dim: usize,
    coords: Vec<String>,
    modes: Vec<ModeDef>,
    edges: Vec<EdgeDef>,
    out: Vec<Vec<usize>>,
    init: Vec<(usize, Polytope)>,
    terminal: Vec<bool>,
}

impl HybridAutomaton {
    pub fn new(name: impl Into<String>, dim: usize, coords: Vec<String>) -> Result<Self> {
        let coords = if coords.is_empty() {
            (0..dim).map(|i| format!("x{i}")).collect()
        } else {
            coords
        };
        if coords.len() != dim {
            return Err(HybridError::DimensionMismatch { expected: dim, got: coords.len() });
        }
        Ok(Self {
            name: name.into(),
            dim,
            coords,
            modes: Vec::new(),
            edges: Vec::new(),
            out: Vec::new(),
            init: Vec::new(),
            terminal: Vec::new(),
        })
    }

    pub fn add_mode(
        &mut self,
        name: impl Into<String>,
        flow: FlowSpec,
        invariant: Option<Polytope>,
    ) -> Result<usize> {
        let name = name.into();
        if self.modes.iter().any(|m| m.name == name) {
            return Err(HybridError::InvalidModel(format!("duplicate mode name `{name}`")));
        }
        if flow.dim() != self.dim {
            return Err(HybridError::DimensionMismatch { expected: self.dim, got: flow.dim() });
        }
        flow.validate()?;
        if let Some(inv) = &invariant {
            if inv.dim() != self.dim {
                return Err(HybridError::DimensionMismatch { expected: self.dim, got: inv.dim() });
            }
        }
        self.modes.push(ModeDef { name, flow, invariant });
        self.out.push(Vec::new());
        self.terminal.push(false);
        Ok(self.modes.len() - 1)
    }

    /// Marks a mode as terminal: executions entering it stop. Modes without
    /// outgoing edges are not terminal by default, they simply keep flowing.
    pub fn mark_terminal(&mut self, mode: usize) -> Result<()> {
        if mode >= self.modes.len() {
            return Err(HybridError::InvalidModel("terminal mark references a missing mode".into()));
        }
        self.terminal[mode] = true;
        Ok(())
    }

    pub fn is_terminal_mode(&self, mode: usize) -> bool {
        self.terminal[mode]
    }

    pub fn add_edge(&mut self, edge: EdgeDef) -> Result<usize> {
        if edge.src >= self.modes.len() || edge.dst >= self.modes.len() {
            return Err(HybridError::InvalidModel(format!(
                "edge `{}` references a missing mode",
                edge.label
            )));
        }
        if edge.guard.dim() != self.dim {
            return Err(HybridError::DimensionMismatch { expected: self.dim, got: edge.guard.dim() });
        }
        if edge.reset.dim() != self.dim {
            return Err(HybridError::DimensionMismatch { expected: self.dim, got: edge.reset.dim() });
        }
        let id = self.edges.len();
        self.out[edge.src].push(id);
        self.edges.push(edge);
        Ok(id)
    }

    pub fn set_init(&mut self, mode: usize, set: Polytope) -> Result<()> {
        if mode >= self.modes.len() {
            return Err(HybridError::InvalidModel("init references a missing mode".into()));
        }
        if set.dim() != self.dim {
            return Err(HybridError::DimensionMismatch { expected: self.dim, got: set.dim() });
        }
        self.init.push((mode, set));
        Ok(())
    }

    pub fn mode_index(&self, name: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.name == name)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_def(&self, i: usize) -> &ModeDef {
        &self.modes[i]
    }

    pub fn edge_defs(&self) -> &[EdgeDef] {
        &self.edges
    }

    pub fn edge_def(&self, i: usize) -> &EdgeDef {
        &self.edges[i]
    }

    pub fn outgoing(&self, mode: usize) -> &[usize] {
        &self.out[mode]
    }

    pub fn init_sets(&self) -> &[(usize, Polytope)] {
        &self.init
    }

    fn mode_of(&self, m: &ModeKey) -> usize {
        let idx = m.single().expect("explicit automata use flat mode keys");
        assert!(idx < self.modes.len(), "mode key {idx} out of range");
        idx
    }
}

impl Automaton for HybridAutomaton {
    fn dim(&self) -> usize {
        self.dim
    }

    fn coord_names(&self) -> Vec<String> {
        self.coords.clone()
    }

    fn initial(&self) -> Vec<(ModeKey, Polytope)> {
        self.init.iter().map(|(m, p)| (ModeKey::flat(*m), p.clone())).collect()
    }

    fn mode_name(&self, m: &ModeKey) -> String {
        self.modes[self.mode_of(m)].name.clone()
    }

    fn flow(&self, m: &ModeKey) -> FlowSpec {
        self.modes[self.mode_of(m)].flow.clone()
    }

    fn invariant(&self, m: &ModeKey) -> Option<Polytope> {
        self.modes[self.mode_of(m)].invariant.clone()
    }

    fn edges_from(&self, m: &ModeKey) -> Vec<EdgeInstance> {
        let src = self.mode_of(m);
        self.out[src]
            .iter()
            .map(|&ei| {
                let e = &self.edges[ei];
                EdgeInstance {
                    label: e.label.clone(),
                    trigger: e.trigger.clone(),
                    guard: Arc::new(e.guard.clone()),
                    parts: vec![JumpPart {
                        condition: None,
                        reset: Arc::new(e.reset.clone()),
                        seg_start: 0,
                        dst_seg: vec![e.dst as u16],
                        emits: e.emits.clone(),
                        label: e.label.clone(),
                    }],
                }
            })
            .collect()
    }

    fn is_terminal(&self, m: &ModeKey) -> bool {
        self.terminal[self.mode_of(m)]
    }

    fn modes(&self) -> Option<Vec<ModeKey>> {
        Some((0..self.modes.len()).map(ModeKey::flat).collect())
    }
}
