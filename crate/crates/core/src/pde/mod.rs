//! The nonlinear Neumann problem `-div grad c*(D phi) = c_R` on a disk,
//! solved by convex minimisation over piecewise-linear fields.
//!
//! Sign convention: with outward flux `g`, the divergence theorem forces
//! `c_R = -|B_R|^{-1} int g`.

mod diagnostics;
mod mesh;
mod solve;

pub use diagnostics::{
    gradient_distance_pow, holder_product_check, holder_seminorm, regularity_diagnostics, DiagnosticsReport, DiffSample, HolderProductCheck, BETA,
};
pub use mesh::{BoundaryEdge, DiskMesh};
pub use solve::{
    flux_field, solve_linear, solve_neumann, GradientSample, NeumannProblem, ScalarField, SolveStats, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
