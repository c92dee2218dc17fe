//! Set-geometry kernel for hybrid-system reachability: halfspace polytopes,
//! a lazy support-function algebra, template hulls, matrix exponentials, the
//! interpolated one-step flow over-approximation, discrete-jump images and
//! exact polytope distances.

mod distance;
mod error;
pub mod lp;
mod matexp;
mod omega;
mod polytope;
mod project;
mod sample;
mod support;
mod template;

pub use distance::{poly_distance, poly_distance_pair};
pub use error::{Result, SetgeomError};
pub use matexp::{abs_matrix, mat_exp, phi2};
pub use omega::{discrete_post_over, omega, omega_with_exp};
pub use polytope::{Polytope, Support};
pub use project::{affine_image, project};
pub use sample::sample_polytope;
pub use support::SupportSet;
pub use template::{box_hull, template_hull, TemplateDirections};
