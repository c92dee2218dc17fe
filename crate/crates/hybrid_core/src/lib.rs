//! Hybrid automata with urgent transitions: continuous flows, guarded jumps,
//! event-synchronized products, numeric simulation and exact discrete posts.

mod automaton;
mod compose;
mod error;
mod flow;
mod guard;
mod io;
mod post;
mod product;
mod simulate;

pub use automaton::{Automaton, EdgeDef, EdgeInstance, HybridAutomaton, JumpPart, ModeDef, ModeKey};
pub use compose::{compose, compose_lazy, ExplicitComponent};
pub use error::{HybridError, Result};
pub use flow::{
    flow, flow_with_scratch, DecayRow, FlowScratch, FlowSpec, SparseFlow, SparseRow,
    DEFAULT_MAX_STEP,
};
pub use guard::{Guard, GuardResidual, Reset, ResetResidual, GUARD_TOL};
pub use io::{load_model, load_model_file, save_model, save_model_file};
pub use post::post_discrete_exact;
pub use product::{Component, ComponentEdge, ProductAutomaton, ProductBuilder, ProductFlow};
pub use simulate::{
    initial_point, simulate, simulate_from, Ambiguity, EndReason, Execution, HybridState,
    InputSignal, JumpRecord, Monitor, SimConfig, SimInputs, TracePoint,
};
