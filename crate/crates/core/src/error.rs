use std::fmt;

use thiserror::Error;

/// One violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioIssue {
    EmptyAlphabet,
    DuplicateOutcome(String),
    DuplicateMeasurement(String),
    EmptyContext(usize),
    UnknownMeasurement { context: usize, measurement: String },
    DuplicateInContext { context: usize, measurement: String },
    SubsetContext { subset: usize, superset: usize },
    OrphanMeasurement(String),
}

impl fmt::Display for ScenarioIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyAlphabet => write!(f, "outcome alphabet is empty"),
            Self::DuplicateOutcome(o) => write!(f, "duplicate outcome label `{o}`"),
            Self::DuplicateMeasurement(m) => write!(f, "duplicate measurement `{m}`"),
            Self::EmptyContext(c) => write!(f, "context {c} is empty"),
            Self::UnknownMeasurement {
                context,
                measurement,
            } => write!(f, "context {context} names unknown measurement `{measurement}`"),
            Self::DuplicateInContext {
                context,
                measurement,
            } => write!(f, "context {context} repeats measurement `{measurement}`"),
            Self::SubsetContext { subset, superset } => {
                write!(f, "context {subset} is contained in context {superset}")
            }
            Self::OrphanMeasurement(m) => write!(f, "measurement `{m}` belongs to no context"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {}", join(.0))]
    InvalidScenario(Vec<ScenarioIssue>),

    #[error("n-cycle needs n >= 3, got {0}")]
    CycleTooSmall(usize),

    #[error("unknown measurement `{0}`")]
    UnknownMeasurement(String),

    #[error("context index {0} out of range")]
    UnknownContext(usize),

    #[error("measurement `{measurement}` is not in context {context}")]
    NotInContext { context: usize, measurement: String },

    #[error("context {context}: {reason}")]
    InvalidTable { context: usize, reason: String },

    #[error("behavior has {got} tables but the scenario has {expected} contexts")]
    TableCount { expected: usize, got: usize },

    #[error("infeasible correlators: {0}")]
    InfeasibleCorrelators(String),

    #[error("distributions are over different alphabets (sizes {0} and {1})")]
    MismatchedAlphabets(usize, usize),

    #[error("a coupling needs at least {min} and at most {max} marginals, got {got}")]
    CouplingArity { min: usize, max: usize, got: usize },

    #[error("no multimaximal coupling exists for measurement `{0}`")]
    NoMultimaximalCoupling(String),

    #[error("{required} global assignments exceed the vertex cap of {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("LP dimension mismatch: {0}")]
    Dimension(String),

    #[error("LP did not terminate within {0} pivots")]
    IterationLimit(usize),

    #[error("scenario is not an n-cycle: {0}")]
    NotACycle(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Parse(String),
}

fn join(issues: &[ScenarioIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
