//! Numerical laboratory for the geometric linearisation of optimal transport
//! with strongly p-convex costs `c(x - y)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`cost`]: the cost family, its conjugate and sampling-based checks of the
//!   structural inequalities.
//! * [`measure`]: weighted point clouds, balls, quadratures and boundary data.
//! * [`ot`]: exact discrete transport, oracles, smallness quantities and the
//!   lemma-level numerical checks.
//! * [`trajectory`]: crossing times, boundary measures, radius selection.
//! * [`pde`]: the nonlinear Neumann problem on a disk mesh.
//! * [`pipeline`]: the end-to-end linearisation experiment.
//! * [`harness`]: configuration, instance generators, caching and output.

pub mod cost;
pub mod error;
pub mod geom;
pub mod harness;
pub mod measure;
pub mod ot;
pub mod pde;
pub mod pipeline;
pub mod quadrature;
pub mod trajectory;

pub use cost::{CostFamily, CostSpec};
pub use error::{Error, Result};
pub use geom::Point;





pub use harness::{generate, ExperimentConfig, InstanceFamily, LemmaName};
pub use measure::{Ball, BoundaryData, DiscreteMeasure};
pub use ot::{solve_exact, DataMetric, Normalization, TransportPlan};
pub use pde::{DiskMesh, NeumannProblem, ScalarField};
pub use pipeline::{run_linearization, scaling_study, LinearizationReport, PipelineConfig, StudyTable};
pub use trajectory::{CrossingTimes, Trajectory};
