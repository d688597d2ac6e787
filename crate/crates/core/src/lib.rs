//! QUBO formulations of routing problems.
//!
//! The crate builds quadratic binary models for the travelling salesman
//! problem (four encodings: native time-indexed, MTZ, relation-slot "GPS",
//! and position-based) and for a min-max vehicle routing problem (5-slot and
//! reduced 3-slot encodings). Solutions come from a simulated-annealing
//! sampler or exact oracles, and every model can be decoded back into tours
//! or route sets with per-constraint violation reporting.

pub mod decode;
pub mod files;
pub mod formulations;
pub mod instance;
pub mod qubo;
pub mod solvers;
pub mod varmap;

pub use decode::{RouteSet, Tour, ViolationReport};
pub use formulations::{BuildOutput, PenaltyWeights};
pub use instance::{RoutingInstance, VrpConfig};
pub use qubo::{Assignment, IsingModel, LinearExpr, QuboModel, SizeReport};
pub use varmap::{FormulationKind, VarKey, VariableMap};
