//! Decision procedures and quantifiers for traditional and
//! contextuality-by-default (extended) noncontextuality.
//!
//! The numeric core is generic over [`Scalar`]: run it in `f64` for speed or
//! in [`Rational`] to adjudicate boundary cases exactly.

pub mod behavior;
pub mod coupling;
pub mod error;
pub mod extension;
pub mod lp;
pub mod ncycle;
pub mod polytope;
pub mod quantifiers;
pub mod sample;
pub mod scalar;
pub mod scenario;

pub use behavior::{from_correlators, Behavior, Distribution};
pub use coupling::{CouplingPolicy, CouplingTable};
pub use error::{Error, Result, ScenarioIssue};
pub use extension::{extend, lift_behavior, ContextKind, CopyId, ExtendedScenario};
pub use lp::{LpProblem, LpSolution, LpStatus};
pub use ncycle::{CycleCorrelators, CriterionResult};
pub use polytope::{is_extended_noncontextual, is_noncontextual, vertex_matrix, Decision, Evidence, Options, VertexMatrix};
pub use quantifiers::{quantify, L1Flavor, Quantifier, QuantifierReport, Witness};
pub use scalar::{Rational, Scalar};
pub use scenario::{OutcomeAlphabet, Scenario, ScenarioSpec};

pub type Behavior64 = Behavior<f64>;
pub type BehaviorQ = Behavior<Rational>;
pub type Distribution64 = Distribution<f64>;
pub type DistributionQ = Distribution<Rational>;
