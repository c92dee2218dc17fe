//! Flowpipe reachability for hybrid automata: time-bounded continuous reach
//! sets as time-indexed template polytopes, plus the over-approximate time
//! and jump Post operators that partition refinement consumes.

mod config;
mod cont;
mod error;
mod flowpipe;
mod post;

pub use config::{ReachConfig, TemplateChoice};
pub use cont::{poly_box, reach_cont, reach_flow};
pub use error::{ReachError, Result};
pub use flowpipe::{vertices_2d, Flowpipe, Section};
pub use post::{post_edge_over, post_edge_over_one, post_tau_over};
