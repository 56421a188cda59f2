//! Small optimization toolkit: seeded multi-start local search on boxes,
//! stable linear least squares, and the projections onto the centrality
//! constraint sets of the deformation parameters.

mod lsq;
mod project;
mod search;

pub use lsq::least_squares_solve;
pub use project::{project_amplitude, project_phase, Projected, POSITIVITY_FLOOR};
pub use search::{
    line_search, multistart_minimize, nelder_mead, BoxSpec, Engine, LocalResult, MultiStart, OptimReport,
};
