//! Tie contact between two elastic bodies glued along a straight interface,
//! discretized with mortar multipliers and an optional residual
//! stabilization.

pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod interface;
pub mod linsolve;
pub mod mesh;
pub mod quadrature;
pub mod saddle;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};
pub use fem::{DofMap, ElasticMaterial};
pub use interface::{MergedPartition, MultiplierKind, MultiplierSpace};
pub use mesh::{BoundaryTag, Mesh2D, SideTags, TraceMesh};
pub use sparse::CsrMatrix;
pub use saddle::{build_system, solve, Alpha, MethodSpec, Preset, Problem, SaddleSystem, Solution};
pub use study::{run_study, ConvergenceReport, StudyConfig};
