//! hardylab: variational computations for quasilinear energy functionals on
//! discretized 1D, radial, and 2D domains.
//!
//! The crate evaluates the energy functional built from an anisotropic
//! p-gradient term and a potential, computes generalized capacities by
//! obstacle-constrained minimization, the capacity-normalized weight norm and
//! best Hardy constants, localized and at-infinity spectral constants with
//! criticality and compactness diagnostics, and ships closed-form radial
//! oracles used as ground truth by the test suite.
//!
//! See the `book/` directory for a guided tour with runnable snippets.

pub mod capacity;
pub mod energy;
pub mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod hardy;
pub mod morrey;
pub mod oracles;
pub mod problem;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod solver;
pub mod spectral;
pub mod study;

pub use error::{Error, Result};
pub use field::{CellField, CoefficientA, ScalarField, SymMat2};
pub use geometry::{
    build_geometry, exhaustion, set_family, unit_sphere_area, FamilyStrategy, Geometry,
    GeometryKind, GeometrySpec, Point, SubsetMask,
};
pub use problem::Problem;
pub use solver::{SolverOptions, StopReason, VariationalResult};
