//! Error types, one enum per subsystem.

use thiserror::Error;

/// Structural problems with an influence-diagram graph.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph contains a directed cycle through {0}")]
    CycleDetected(String),
    #[error("utility node {0} has a child")]
    UtilityHasChild(String),
    #[error("edge {0} -> {1} refers to a node that does not exist")]
    DanglingEdge(String, String),
    #[error("node {0} declared twice")]
    DuplicateNode(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("{0} is not a decision node")]
    NotADecision(String),
    #[error("fresh name {0} collides with an existing node")]
    NameCollision(String),
    #[error("malformed graph document: {0}")]
    Malformed(String),
}

/// Failures of path and separation queries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeparationError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("walk does not satisfy the activity hypothesis: {0}")]
    HypothesisViolated(String),
}

/// Failures of structural analysis.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{0} -> {1} is not an information link")]
    NoSuchInfolink(String, String),
    #[error("{0} is not a chance node")]
    NotAChanceNode(String),
}

/// Failures of homomorphism construction, checking and composition.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HomError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("map is not total: {0} has no image")]
    PartialMap(String),
    #[error("homomorphism composition domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("copy sets overlap on {0}")]
    OverlappingCopySets(String),
    #[error("prune would drop the information link {0} -> {1}")]
    DroppedInfolink(String, String),
    #[error("homomorphism condition ({condition}) fails: {detail}")]
    ConditionFails { condition: char, detail: String },
}

/// Failures of system and tree construction or validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error("{0} -> {1} is not requisite")]
    NotRequisite(String, String),
    #[error("{0} -> {1} is not an information link")]
    NoSuchInfolink(String, String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("malformed tree document: {0}")]
    Malformed(String),
}

/// Failures of the normal-form pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Hom(#[from] HomError),
    #[error("graph is not soluble")]
    Insoluble,
    #[error("{0} -> {1} is not in the minimal d-reduction")]
    CriterionFails(String, String),
    #[error("tree is not in normal form: {0}")]
    NotNormalForm(String),
    #[error("position uniqueness fails: {0}")]
    PropertyAMissing(String),
    #[error("front-door information path fails: {0}")]
    PropertyABMissing(String),
}

/// Failures of model construction, evaluation and transport.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Hom(#[from] HomError),
    #[error("model is invalid: {0}")]
    Invalid(String),
    #[error("policy is incomplete: {0}")]
    PolicyIncomplete(String),
    #[error("homomorphism does not verify: {0}")]
    UnverifiedHom(String),
    #[error("no edge {0} -> {1}")]
    NoSuchEdge(String, String),
    #[error("{0} -> {1} is not an information link")]
    NotAnInfolink(String, String),
    #[error("enumeration of {what} exceeds the cap ({size} > {cap})")]
    TooLarge { what: String, size: String, cap: u64 },
    #[error("malformed model document: {0}")]
    Malformed(String),
}

/// Failures of witness construction.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hom(#[from] HomError),
    #[error("graph is not soluble")]
    Insoluble,
    #[error("criterion does not hold: {0}")]
    CriterionFails(String),
    #[error("bitstring domain of length {len} exceeds the cap {cap}")]
    DomainBlowup { len: usize, cap: usize },
    #[error("task link {0} -> {1} is not in the minimal d-reduction")]
    TaskNotInReduction(String, String),
    #[error("decision ordering is invalid: {0}")]
    OrderingInvalid(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("certificate check failed: {0}")]
    CertificateFailed(String),
    #[error("construction is inconsistent: {0}")]
    Inconsistent(String),
}

/// Failures of fixture lookup.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("unknown fixture {0}")]
    UnknownFixture(String),
}

/// Failures of exact optimization.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("decision ordering is invalid: {0}")]
    OrderingInvalid(String),
    #[error("{0} -> {1} is not an information link")]
    NoSuchInfolink(String, String),
    #[error("{0} is not a chance node")]
    NotAChanceNode(String),
}

impl From<SolverError> for WitnessError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Model(m) => WitnessError::Model(m),
            SolverError::OrderingInvalid(s) => WitnessError::OrderingInvalid(s),
            other => WitnessError::CertificateFailed(other.to_string()),
        }
    }
}
