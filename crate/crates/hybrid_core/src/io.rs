//! JSON model format for explicit automata.
//!
//! ```json
//! {
//!   "name": "thermostat",
//!   "dim": 1,
//!   "coords": ["temp"],
//!   "modes": ["heat", "cool"],
//!   "flows": { "heat": { "kind": "linear_ode", "a": [[-1.0]], "b": [30.0] },
//!              "cool": { "kind": "linear_ode", "a": [[-1.0]], "b": [10.0] } },
//!   "invariants": { "heat": { "a": [[1.0]], "b": [23.0] } },
//!   "edges": [ { "src": "heat", "dst": "cool",
//!                "guard": { "a": [[-1.0]], "b": [-22.0] },
//!                "reset": { "m": [[1.0]], "c": [0.0] },
//!                "label": "hot" } ],
//!   "init": [ { "mode": "heat", "set": { "a": [[1.0], [-1.0]], "b": [19.0, -18.0] } } ]
//! }
//! ```
//!
//! Guard and reset residuals have no file form; saving a model that uses them
//! fails.

use crate::automaton::{Automaton, EdgeDef, HybridAutomaton};
use crate::error::{HybridError, Result};
use crate::flow::{DecayRow, FlowSpec, SparseFlow, SparseRow};
use crate::guard::{Guard, Reset};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use setgeom::Polytope;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct ModelDto {
    #[serde(default = "default_name")]
    name: String,
    dim: usize,
    #[serde(default)]
    coords: Vec<String>,
    modes: Vec<String>,
    flows: BTreeMap<String, FlowDto>,
    #[serde(default)]
    invariants: BTreeMap<String, PolyDto>,
    edges: Vec<EdgeDto>,
    init: Vec<InitDto>,
    /// Modes where executions stop.
    #[serde(default)]
    terminal: Vec<String>,
}

fn default_name() -> String {
    "model".into()
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FlowDto {
    LinearOde { a: Vec<Vec<f64>>, b: Vec<f64> },
    Clock { rates: Vec<f64> },
    Constant,
    ThresholdDecay { rates: Vec<f64>, coord: usize, ef: usize, tc: f64, floor: f64 },
    Sparse { rows: Vec<SparseRowDto>, decays: Vec<DecayDto>, max_step: f64 },
}

#[derive(Serialize, Deserialize)]
struct SparseRowDto {
    #[serde(default)]
    entries: Vec<(usize, f64)>,
    #[serde(default)]
    constant: f64,
}

#[derive(Serialize, Deserialize)]
struct DecayDto {
    coord: usize,
    ef: usize,
    tc: f64,
    floor: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyDto {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    src: String,
    dst: String,
    guard: PolyDto,
    reset: ResetDto,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    emits: Vec<String>,
    #[serde(default)]
    trigger: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ResetDto {
    m: Vec<Vec<f64>>,
    c: Vec<f64>,
}

fn matrix(field: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(HybridError::InvalidModel(format!(
                "{field}: row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn poly(field: &str, dto: &PolyDto, dim: usize) -> Result<Polytope> {
    let a = matrix(field, &dto.a, dim)?;
    if dto.b.len() != dto.a.len() {
        return Err(HybridError::InvalidModel(format!(
            "{field}: {} rows but {} offsets",
            dto.a.len(),
            dto.b.len()
        )));
    }
    Ok(Polytope::new(a, DVector::from_vec(dto.b.clone()))?)
}

fn flow(field: &str, dto: &FlowDto, dim: usize) -> Result<FlowSpec> {
    let spec = match dto {
        FlowDto::LinearOde { a, b } => {
            if a.len() != dim {
                return Err(HybridError::InvalidModel(format!(
                    "{field}: matrix has {} rows, expected {dim}",
                    a.len()
                )));
            }
            FlowSpec::LinearOde { a: matrix(field, a, dim)?, b: DVector::from_vec(b.clone()) }
        }
        FlowDto::Clock { rates } => FlowSpec::Clock { rates: DVector::from_vec(rates.clone()) },
        FlowDto::Constant => FlowSpec::Constant { dim },
        FlowDto::ThresholdDecay { rates, coord, ef, tc, floor } => FlowSpec::ThresholdDecay {
            rates: DVector::from_vec(rates.clone()),
            decay: DecayRow { coord: *coord, ef: *ef, tc: *tc, floor: *floor },
        },
        FlowDto::Sparse { rows, decays, max_step } => FlowSpec::Sparse(SparseFlow::new(
            dim,
            rows.iter()
                .map(|r| SparseRow { entries: r.entries.clone(), constant: r.constant })
                .collect(),
            decays
                .iter()
                .map(|d| DecayRow { coord: d.coord, ef: d.ef, tc: d.tc, floor: d.floor })
                .collect(),
            *max_step,
        )?),
    };
    if spec.dim() != dim {
        return Err(HybridError::InvalidModel(format!(
            "{field}: flow dimension {}, expected {dim}",
            spec.dim()
        )));
    }
    spec.validate()?;
    Ok(spec)
}

/// Parses a model from its JSON text.
pub fn load_model(json: &str) -> Result<HybridAutomaton> {
    let dto: ModelDto =
        serde_json::from_str(json).map_err(|e| HybridError::Parse(e.to_string()))?;
    let mut aut = HybridAutomaton::new(dto.name.clone(), dto.dim, dto.coords.clone())?;
    for mode in &dto.modes {
        let fdto = dto.flows.get(mode).ok_or_else(|| {
            HybridError::InvalidModel(format!("flows: missing entry for mode `{mode}`"))
        })?;
        let f = flow(&format!("flows.{mode}"), fdto, dto.dim)?;
        let inv = match dto.invariants.get(mode) {
            Some(p) => Some(poly(&format!("invariants.{mode}"), p, dto.dim)?),
            None => None,
        };
        aut.add_mode(mode.clone(), f, inv)?;
    }
    for name in dto.flows.keys() {
        if !dto.modes.contains(name) {
            return Err(HybridError::InvalidModel(format!(
                "flows: entry for unknown mode `{name}`"
            )));
        }
    }
    for (i, e) in dto.edges.iter().enumerate() {
        let src = aut.mode_index(&e.src).ok_or_else(|| {
            HybridError::InvalidModel(format!("edges[{i}].src: unknown mode `{}`", e.src))
        })?;
        let dst = aut.mode_index(&e.dst).ok_or_else(|| {
            HybridError::InvalidModel(format!("edges[{i}].dst: unknown mode `{}`", e.dst))
        })?;
        let guard = Guard::from_poly(poly(&format!("edges[{i}].guard"), &e.guard, dto.dim)?);
        let m = matrix(&format!("edges[{i}].reset.m"), &e.reset.m, dto.dim)?;
        if m.nrows() != dto.dim {
            return Err(HybridError::InvalidModel(format!(
                "edges[{i}].reset.m: {} rows, expected {}",
                m.nrows(),
                dto.dim
            )));
        }
        let reset = Reset::from_affine(&m, &DVector::from_vec(e.reset.c.clone()))?;
        aut.add_edge(EdgeDef {
            src,
            dst,
            guard,
            reset,
            label: e.label.clone().unwrap_or_else(|| format!("e{i}")),
            emits: e.emits.clone(),
            trigger: e.trigger.clone(),
        })?;
    }
    for (i, init) in dto.init.iter().enumerate() {
        let mode = aut.mode_index(&init.mode).ok_or_else(|| {
            HybridError::InvalidModel(format!("init[{i}].mode: unknown mode `{}`", init.mode))
        })?;
        let set = poly(&format!("init[{i}].set"), &init.set, dto.dim)?;
        aut.set_init(mode, set)?;
    }
    if aut.init_sets().is_empty() {
        return Err(HybridError::InvalidModel("init: at least one initial set is required".into()));
    }
    for (i, name) in dto.terminal.iter().enumerate() {
        let mode = aut.mode_index(name).ok_or_else(|| {
            HybridError::InvalidModel(format!("terminal[{i}]: unknown mode `{name}`"))
        })?;
        aut.mark_terminal(mode)?;
    }
    Ok(aut)
}

#[derive(Serialize, Deserialize)]
struct InitDto {
    mode: String,
    set: PolyDto,
}

/// Serializes an explicit automaton to the JSON model format.
pub fn save_model(aut: &HybridAutomaton) -> Result<String> {
    let dim = aut.dim();
    let modes: Vec<String> = (0..aut.n_modes()).map(|i| aut.mode_def(i).name.clone()).collect();
    let mut flows = BTreeMap::new();
    let mut invariants = BTreeMap::new();
    for i in 0..aut.n_modes() {
        let def = aut.mode_def(i);
        let fdto = match &def.flow {
            FlowSpec::LinearOde { a, b } => FlowDto::LinearOde {
                a: to_rows(a),
                b: b.iter().copied().collect(),
            },
            FlowSpec::Clock { rates } => FlowDto::Clock { rates: rates.iter().copied().collect() },
            FlowSpec::Constant { .. } => FlowDto::Constant,
            FlowSpec::ThresholdDecay { rates, decay } => FlowDto::ThresholdDecay {
                rates: rates.iter().copied().collect(),
                coord: decay.coord,
                ef: decay.ef,
                tc: decay.tc,
                floor: decay.floor,
            },
            FlowSpec::Sparse(s) => FlowDto::Sparse {
                rows: s
                    .rows
                    .iter()
                    .map(|r| SparseRowDto { entries: r.entries.clone(), constant: r.constant })
                    .collect(),
                decays: s
                    .decays
                    .iter()
                    .map(|d| DecayDto { coord: d.coord, ef: d.ef, tc: d.tc, floor: d.floor })
                    .collect(),
                max_step: s.max_step,
            },
        };
        flows.insert(def.name.clone(), fdto);
        if let Some(inv) = &def.invariant {
            invariants.insert(
                def.name.clone(),
                PolyDto { a: to_rows(inv.a()), b: inv.b().iter().copied().collect() },
            );
        }
    }
    let mut edges = Vec::new();
    for e in aut.edge_defs() {
        if e.guard.residual.is_some() || !e.reset.is_affine() {
            return Err(HybridError::InvalidModel(format!(
                "edge `{}` has residuals, which have no file form",
                e.label
            )));
        }
        let (m, c) = e.reset.to_dense();
        edges.push(EdgeDto {
            src: aut.mode_def(e.src).name.clone(),
            dst: aut.mode_def(e.dst).name.clone(),
            guard: PolyDto {
                a: to_rows(e.guard.poly.a()),
                b: e.guard.poly.b().iter().copied().collect(),
            },
            reset: ResetDto { m: to_rows(&m), c: c.iter().copied().collect() },
            label: Some(e.label.clone()),
            emits: e.emits.clone(),
            trigger: e.trigger.clone(),
        });
    }
    let init = aut
        .init_sets()
        .iter()
        .map(|(m, set)| InitDto {
            mode: aut.mode_def(*m).name.clone(),
            set: PolyDto { a: to_rows(set.a()), b: set.b().iter().copied().collect() },
        })
        .collect();
    let terminal = (0..aut.n_modes())
        .filter(|&i| aut.is_terminal_mode(i))
        .map(|i| aut.mode_def(i).name.clone())
        .collect();
    let dto = ModelDto {
        name: aut.name.clone(),
        dim,
        coords: aut.coord_names(),
        modes,
        flows,
        invariants,
        edges,
        init,
        terminal,
    };
    serde_json::to_string_pretty(&dto).map_err(|e| HybridError::Parse(e.to_string()))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<HybridAutomaton> {
    let text = std::fs::read_to_string(path)?;
    load_model(&text)
}

pub fn save_model_file(aut: &HybridAutomaton, path: impl AsRef<Path>) -> Result<()> {
    let text = save_model(aut)?;
    std::fs::write(path, text)?;
    Ok(())
}
