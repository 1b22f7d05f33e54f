//! Ground truth: 1-WL refinement, distance signatures, discrete wave solvers
//! and the information-propagation bound.

mod bound;
mod symbolic;
mod wl;

pub use bound::{info_bound_closed_form, info_bound_monte_carlo, MonteCarlo};
pub use symbolic::{run_wave, symbolic_solve, SymbolicRun};
pub use wl::{color_histogram, distance_signature, wl_refine, wl_refine_joint, Coloring};
