//! Lazy parallel composition of hybrid components over a shared state space.
//!
//! Components own disjoint blocks of the product's coordinates and of its
//! mode key, but may read any coordinate in guards, resets and flows. A jump
//! is initiated by one component's edge; events it emits trigger edges of
//! other components at the same instant, transitively, with every component
//! moving at most once per synchronized jump. Listener participation is
//! conditional on the listener's own guard, so one product edge carries the
//! emitter plus a list of conditional parts.

use crate::automaton::{Automaton, EdgeInstance, JumpPart, ModeKey};
use crate::error::{HybridError, Result};
use crate::flow::{DecayRow, FlowSpec, SparseFlow, SparseRow, DEFAULT_MAX_STEP};
use crate::guard::{Guard, Reset};
use nalgebra::{DMatrix, DVector};
use setgeom::Polytope;
use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

/// An edge contributed by one component, in global coordinates.
#[derive(Clone, Debug)]
pub struct ComponentEdge {
    pub label: String,
    pub guard: Guard,
    pub reset: Reset,
    pub dst_seg: Vec<u16>,
    pub emits: Vec<String>,
}

/// Accumulates the product's vector field for one mode. Coordinates default
/// to zero derivative.
pub struct ProductFlow {
    rows: Vec<SparseRow>,
    decays: Vec<DecayRow>,
    max_step: f64,
}

impl ProductFlow {
    fn new(dim: usize, max_step: f64) -> Self {
        Self { rows: vec![SparseRow::default(); dim], decays: Vec::new(), max_step }
    }

    pub fn set_rate(&mut self, coord: usize, rate: f64) {
        self.rows[coord] = SparseRow::constant(rate);
    }

    pub fn set_row(&mut self, coord: usize, row: SparseRow) {
        self.rows[coord] = row;
    }

    pub fn add_decay(&mut self, d: DecayRow) {
        self.decays.push(d);
    }

    /// Tightens the RK4 substep ceiling.
    pub fn note_max_step(&mut self, h: f64) {
        if h > 0.0 {
            self.max_step = self.max_step.min(h);
        }
    }

    fn finish(self) -> Result<FlowSpec> {
        let dim = self.rows.len();
        Ok(FlowSpec::Sparse(SparseFlow::new(dim, self.rows, self.decays, self.max_step)?))
    }
}

/// One factor of a product automaton.
pub trait Component: Send + Sync {
    fn name(&self) -> &str;
    /// Number of mode-key slots this component occupies.
    fn seg_len(&self) -> usize {
        1
    }
    fn init_seg(&self) -> Vec<u16>;
    /// Initial bounds `(coord, lo, hi)` for the coordinates this component
    /// owns. Unlisted coordinates start at zero.
    fn init_bounds(&self) -> Vec<(usize, f64, f64)>;
    fn mode_name(&self, seg: &[u16]) -> String;
    fn flow_into(&self, seg: &[u16], flow: &mut ProductFlow);
    /// Invariant rows `a . x <= b` in global coordinates.
    fn invariant_rows(&self, _seg: &[u16]) -> Vec<(SparseRow, f64)> {
        vec![]
    }
    /// Autonomous edges out of `seg`.
    fn local_edges(&self, seg: &[u16]) -> Vec<Arc<ComponentEdge>>;
    /// Edges out of `seg` that fire when `event` is raised.
    fn triggered(&self, _seg: &[u16], _event: &str) -> Vec<Arc<ComponentEdge>> {
        vec![]
    }
    /// Event names this component's edges can emit.
    fn can_emit(&self) -> Vec<String> {
        vec![]
    }
    /// Event names this component's triggered edges listen for.
    fn listens_to(&self) -> Vec<String> {
        vec![]
    }
    fn is_terminal(&self, _seg: &[u16]) -> bool {
        false
    }
    /// Full mode enumeration when tractable.
    fn enumerate_segs(&self) -> Option<Vec<Vec<u16>>> {
        None
    }
}

/// Assembles coordinate allocations and components into a product.
pub struct ProductBuilder {
    name: String,
    coords: Vec<String>,
    components: Vec<Box<dyn Component>>,
    max_step: f64,
}

impl ProductBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), coords: Vec::new(), components: Vec::new(), max_step: DEFAULT_MAX_STEP }
    }

    /// Reserves coordinates named `prefix.name` and returns the offset of the
    /// first.
    pub fn alloc(&mut self, prefix: &str, names: &[&str]) -> Result<usize> {
        let offset = self.coords.len();
        for n in names {
            let full = if prefix.is_empty() { (*n).to_string() } else { format!("{prefix}.{n}") };
            if self.coords.contains(&full) {
                return Err(HybridError::InvalidModel(format!("duplicate coordinate `{full}`")));
            }
            self.coords.push(full);
        }
        Ok(offset)
    }

    pub fn coord_index(&self, full_name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == full_name)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn set_max_step(&mut self, h: f64) {
        self.max_step = h;
    }

    pub fn add_component(&mut self, c: Box<dyn Component>) {
        self.components.push(c);
    }

    pub fn build(self) -> Result<ProductAutomaton> {
        if self.components.is_empty() {
            return Err(HybridError::InvalidModel("product needs at least one component".into()));
        }
        let mut seg_starts = Vec::with_capacity(self.components.len());
        let mut total = 0usize;
        for c in &self.components {
            seg_starts.push(total);
            total += c.seg_len();
        }
        let emitted: Vec<String> =
            self.components.iter().flat_map(|c| c.can_emit()).collect();
        let mut external: Vec<String> = self
            .components
            .iter()
            .flat_map(|c| c.listens_to())
            .filter(|e| !emitted.contains(e))
            .collect();
        external.sort();
        external.dedup();
        Ok(ProductAutomaton {
            name: self.name,
            coords: self.coords,
            components: self.components,
            seg_starts,
            total_segs: total,
            max_step: self.max_step,
            external_events: external,
        })
    }
}

/// Parallel composition exposed through the [`Automaton`] interface without
/// enumerating the discrete state space.
pub struct ProductAutomaton {
    name: String,
    coords: Vec<String>,
    components: Vec<Box<dyn Component>>,
    seg_starts: Vec<usize>,
    total_segs: usize,
    max_step: f64,
    external_events: Vec<String>,
}

/// Caps cascades so a mis-wired event loop fails fast instead of recursing.
const MAX_PARTS: usize = 256;

impl ProductAutomaton {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &dyn Component {
        self.components[i].as_ref()
    }

    fn seg<'a>(&self, m: &'a ModeKey, ci: usize) -> &'a [u16] {
        let s = self.seg_starts[ci];
        &m.segments()[s..s + self.components[ci].seg_len()]
    }

    /// Builds the full product edge for an initiating component edge:
    /// the emitter part plus conditional listener parts discovered by
    /// following emitted events breadth-first. A component never reacts to
    /// its own initiation, and alternative listener edges for one component
    /// are kept side by side; at fire time the first applicable one wins.
    fn product_edge(
        &self,
        m: &ModeKey,
        emitter_ci: usize,
        e: &ComponentEdge,
        trigger: Option<String>,
    ) -> Result<EdgeInstance> {
        let mut parts = vec![JumpPart {
            condition: None,
            reset: Arc::new(e.reset.clone()),
            seg_start: self.seg_starts[emitter_ci],
            dst_seg: e.dst_seg.clone(),
            emits: e.emits.clone(),
            label: format!("{}.{}", self.components[emitter_ci].name(), e.label),
        }];
        let mut queue: VecDeque<(String, Option<Arc<Guard>>)> =
            e.emits.iter().map(|ev| (ev.clone(), None)).collect();
        while let Some((event, cond)) = queue.pop_front() {
            for (ci, comp) in self.components.iter().enumerate() {
                if ci == emitter_ci {
                    continue;
                }
                for le in comp.triggered(self.seg(m, ci), &event) {
                    let combined = match &cond {
                        None => le.guard.clone(),
                        Some(c) => c.and(&le.guard)?,
                    };
                    // A trivially true condition makes the part unconditional.
                    let condition = if combined.poly.nrows() == 0 && combined.residual.is_none() {
                        None
                    } else {
                        Some(Arc::new(combined))
                    };
                    for ev in &le.emits {
                        queue.push_back((ev.clone(), condition.clone()));
                    }
                    parts.push(JumpPart {
                        condition: condition.clone(),
                        reset: Arc::new(le.reset.clone()),
                        seg_start: self.seg_starts[ci],
                        dst_seg: le.dst_seg.clone(),
                        emits: le.emits.clone(),
                        label: format!("{}.{}", comp.name(), le.label),
                    });
                    if parts.len() > MAX_PARTS {
                        return Err(HybridError::InvalidModel(format!(
                            "event cascade from `{}` exceeds {MAX_PARTS} parts",
                            e.label
                        )));
                    }
                }
            }
        }
        Ok(EdgeInstance {
            label: format!("{}.{}", self.components[emitter_ci].name(), e.label),
            trigger,
            guard: Arc::new(e.guard.clone()),
            parts,
        })
    }

    /// Eagerly expands the reachable discrete structure into an explicit
    /// automaton. Conditional listeners become separate edges per
    /// participation choice, complementing single-row conditions; richer
    /// conditions cannot be materialized.
    pub fn materialize(&self, cap: usize) -> Result<crate::automaton::HybridAutomaton> {
        use crate::automaton::{EdgeDef, HybridAutomaton};

        let mut aut = HybridAutomaton::new(self.name.clone(), self.dim(), self.coords.clone())?;
        let inits = self.initial();
        let (init_mode, init_set) = inits.first().expect("product has an initial mode");

        let mut ids: BTreeMap<ModeKey, usize> = BTreeMap::new();
        let mut frontier = VecDeque::new();
        let mut defs: Vec<ModeKey> = Vec::new();
        ids.insert(init_mode.clone(), 0);
        defs.push(init_mode.clone());
        frontier.push_back(init_mode.clone());
        aut.add_mode(self.mode_name(init_mode), self.flow(init_mode), self.invariant(init_mode))?;

        let mut pending_edges: Vec<(usize, ModeKey, EdgeDef)> = Vec::new();
        while let Some(m) = frontier.pop_front() {
            let src_id = ids[&m];
            for e in self.edges_from(&m) {
                for variant in enumerate_variants(&e, self.dim())? {
                    let dst_key = e.dst_mode(&m, &variant.mask);
                    if !ids.contains_key(&dst_key) {
                        if ids.len() >= cap {
                            return Err(HybridError::TooManyModes(ids.len() + 1, cap));
                        }
                        ids.insert(dst_key.clone(), defs.len());
                        defs.push(dst_key.clone());
                        aut.add_mode(
                            self.mode_name(&dst_key),
                            self.flow(&dst_key),
                            self.invariant(&dst_key),
                        )?;
                        frontier.push_back(dst_key.clone());
                    }
                    pending_edges.push((
                        src_id,
                        dst_key,
                        EdgeDef {
                            src: src_id,
                            dst: 0, // patched below
                            guard: variant.guard,
                            reset: variant.reset,
                            label: variant.label,
                            emits: variant.emits,
                            trigger: e.trigger.clone(),
                        },
                    ));
                }
            }
        }
        for (_, dst_key, mut def) in pending_edges {
            def.dst = ids[&dst_key];
            aut.add_edge(def)?;
        }
        for (key, id) in &ids {
            if self.is_terminal(key) {
                aut.mark_terminal(*id)?;
            }
        }
        let init_id = ids[init_mode];
        aut.set_init(init_id, init_set.clone())?;
        Ok(aut)
    }
}

struct EdgeVariant {
    mask: Vec<bool>,
    guard: Guard,
    reset: Reset,
    label: String,
    emits: Vec<String>,
}

/// All participation choices of an edge's conditional parts, with the guard
/// of each choice. Parts claiming an already-claimed mode segment are skipped
/// without a complement factor, since they could not have fired.
fn enumerate_variants(e: &EdgeInstance, dim: usize) -> Result<Vec<EdgeVariant>> {
    let mut out = Vec::new();
    let base_guard = (*e.guard).clone();

    struct Frame {
        idx: usize,
        mask: Vec<bool>,
        claimed: Vec<usize>,
        guard: Guard,
    }
    let mut stack = vec![Frame {
        idx: 1,
        mask: {
            let mut m = vec![false; e.parts.len()];
            m[0] = true;
            m
        },
        claimed: vec![e.parts[0].seg_start],
        guard: base_guard,
    }];
    while let Some(f) = stack.pop() {
        if f.idx == e.parts.len() {
            let included: Vec<&Reset> = e
                .parts
                .iter()
                .enumerate()
                .filter(|(i, _)| f.mask[*i])
                .map(|(_, p)| p.reset.as_ref())
                .collect();
            let label = e
                .parts
                .iter()
                .enumerate()
                .filter(|(i, _)| f.mask[*i])
                .map(|(_, p)| p.label.clone())
                .collect::<Vec<_>>()
                .join("+");
            let emits = e
                .parts
                .iter()
                .enumerate()
                .filter(|(i, _)| f.mask[*i])
                .flat_map(|(_, p)| p.emits.iter().cloned())
                .collect();
            out.push(EdgeVariant {
                mask: f.mask,
                guard: f.guard,
                reset: Reset::merge(dim, &included)?,
                label,
                emits,
            });
            continue;
        }
        let part = &e.parts[f.idx];
        let cond = part.condition.as_ref();
        if f.claimed.contains(&part.seg_start) {
            stack.push(Frame { idx: f.idx + 1, ..f });
            continue;
        }
        match cond {
            None => {
                let mut mask = f.mask.clone();
                mask[f.idx] = true;
                let mut claimed = f.claimed.clone();
                claimed.push(part.seg_start);
                stack.push(Frame { idx: f.idx + 1, mask, claimed, guard: f.guard.clone() });
            }
            Some(c) => {
                let mut in_mask = f.mask.clone();
                in_mask[f.idx] = true;
                let mut in_claimed = f.claimed.clone();
                in_claimed.push(part.seg_start);
                stack.push(Frame {
                    idx: f.idx + 1,
                    mask: in_mask,
                    claimed: in_claimed,
                    guard: f.guard.and(c)?,
                });
                let comp = complement_guard(c)?;
                stack.push(Frame {
                    idx: f.idx + 1,
                    mask: f.mask.clone(),
                    claimed: f.claimed.clone(),
                    guard: f.guard.and(&comp)?,
                });
            }
        }
    }
    Ok(out)
}

/// Closed complement of a single-halfspace guard.
fn complement_guard(g: &Guard) -> Result<Guard> {
    if g.residual.is_some() || g.poly.nrows() != 1 {
        return Err(HybridError::InvalidModel(
            "cannot materialize: listener condition is not a single halfspace".into(),
        ));
    }
    let n = g.poly.dim();
    let mut a = DMatrix::zeros(1, n);
    for j in 0..n {
        a[(0, j)] = -g.poly.a()[(0, j)];
    }
    let b = DVector::from_element(1, -g.poly.b()[0]);
    Ok(Guard::from_poly(Polytope::new(a, b)?))
}

impl Automaton for ProductAutomaton {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn coord_names(&self) -> Vec<String> {
        self.coords.clone()
    }

    fn initial(&self) -> Vec<(ModeKey, Polytope)> {
        let mut segs = Vec::with_capacity(self.total_segs);
        let dim = self.dim();
        let mut lo = DVector::zeros(dim);
        let mut hi = DVector::zeros(dim);
        for c in &self.components {
            segs.extend(c.init_seg());
            for (coord, l, h) in c.init_bounds() {
                lo[coord] = l;
                hi[coord] = h;
            }
        }
        let set = Polytope::from_box(&lo, &hi).expect("matching dims");
        vec![(ModeKey(segs), set)]
    }

    fn mode_name(&self, m: &ModeKey) -> String {
        self.components
            .iter()
            .enumerate()
            .map(|(ci, c)| c.mode_name(self.seg(m, ci)))
            .collect::<Vec<_>>()
            .join("|")
    }

    fn flow(&self, m: &ModeKey) -> FlowSpec {
        let mut pf = ProductFlow::new(self.dim(), self.max_step);
        for (ci, c) in self.components.iter().enumerate() {
            c.flow_into(self.seg(m, ci), &mut pf);
        }
        pf.finish().expect("components assemble a valid flow")
    }

    fn invariant(&self, m: &ModeKey) -> Option<Polytope> {
        let mut rows: Vec<(SparseRow, f64)> = Vec::new();
        for (ci, c) in self.components.iter().enumerate() {
            rows.extend(c.invariant_rows(self.seg(m, ci)));
        }
        if rows.is_empty() {
            return None;
        }
        let dim = self.dim();
        let mut a = DMatrix::zeros(rows.len(), dim);
        let mut b = DVector::zeros(rows.len());
        for (i, (row, rhs)) in rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                a[(i, j)] += v;
            }
            b[i] = *rhs - row.constant;
        }
        Some(Polytope::new(a, b).expect("matching dims"))
    }

    fn edges_from(&self, m: &ModeKey) -> Vec<EdgeInstance> {
        let mut out = Vec::new();
        for (ci, c) in self.components.iter().enumerate() {
            for e in c.local_edges(self.seg(m, ci)) {
                out.push(
                    self.product_edge(m, ci, &e, None)
                        .expect("component events assemble a bounded cascade"),
                );
            }
        }
        for ev in &self.external_events {
            for (ci, c) in self.components.iter().enumerate() {
                for e in c.triggered(self.seg(m, ci), ev) {
                    out.push(
                        self.product_edge(m, ci, &e, Some(ev.clone()))
                            .expect("component events assemble a bounded cascade"),
                    );
                }
            }
        }
        out
    }

    fn is_terminal(&self, m: &ModeKey) -> bool {
        self.components.iter().enumerate().all(|(ci, c)| c.is_terminal(self.seg(m, ci)))
    }

    fn modes(&self) -> Option<Vec<ModeKey>> {
        let mut per: Vec<Vec<Vec<u16>>> = Vec::new();
        let mut count = 1usize;
        for c in &self.components {
            let segs = c.enumerate_segs()?;
            count = count.saturating_mul(segs.len());
            if count > 65_536 {
                return None;
            }
            per.push(segs);
        }
        let mut keys = vec![Vec::new()];
        for segs in &per {
            let mut next = Vec::with_capacity(keys.len() * segs.len());
            for k in &keys {
                for s in segs {
                    let mut k2: Vec<u16> = k.clone();
                    k2.extend(s);
                    next.push(k2);
                }
            }
            keys = next;
        }
        Some(keys.into_iter().map(ModeKey).collect())
    }
}
