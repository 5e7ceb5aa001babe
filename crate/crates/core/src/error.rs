use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. `kind()` gives a stable machine name
/// used in the CLI's JSON error objects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:e} below threshold {threshold:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64, threshold: f64 },

    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("grid has {points} points, need at least {required}")]
    GridTooSmall { points: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite state encountered at t = {at}")]
    NonFiniteState { at: f64 },

    #[error("subcharacteristic condition violated: |f'(u)| = {speed} >= a = {a}")]
    SubcharacteristicViolation { speed: f64, a: f64 },

    #[error("equilibrium branch undefined at u = {u:?}")]
    EquilibriumBranchUndefined { u: Vec<f64> },

    #[error("Newton iteration for {what} failed after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { what: String, iterations: usize, residual: f64 },

    #[error("amplitude epsilon = {epsilon} exceeds the admissible bound {max}")]
    AmplitudeTooLarge { epsilon: f64, max: f64 },

    #[error("field is not genuinely nonlinear: grad(alpha).r = {gnl:e}")]
    NotGenuinelyNonlinear { gnl: f64 },

    #[error("principal eigenvalue is not real and simple (gap {gap:e})")]
    EigenvalueNotSimple { gap: f64 },

    #[error("model provides no symmetrizer")]
    SymmetrizerMissing,

    #[error("no skew matrix gives a positive dissipation margin (best {margin:e})")]
    NoPositiveMargin { margin: f64 },

    #[error("left kernel dimension varies between sample points: {dims:?}")]
    RankDropInconsistent { dims: Vec<usize> },

    #[error("eigenvalue {re} + {im}i lies in the excluded strip")]
    EigenvalueInStrip { re: f64, im: f64 },

    #[error("mode count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("relaxation block dv q is singular at u = {u:?}")]
    SingularRelaxationBlock { u: Vec<f64> },

    #[error("profile integration diverged at x = {x}")]
    ShootingDivergence { x: f64 },

    #[error("Lax count mismatch: expected {expected}, found {found}")]
    WrongLaxCount { expected: usize, found: usize },

    #[error("profile does not reach its end states: boundary defect {defect:e} exceeds {bound:e}")]
    BoundaryProximity { defect: f64, bound: f64 },

    #[error("weight exponent {exponent} would overflow")]
    WeightOverflow { exponent: f64 },

    #[error("tail below the fitting floor on the {side} side")]
    TailBelowFloor { side: String },

    #[error("reduced matrix a11 is singular at x = {x}")]
    A11StarSingular { x: f64 },

    #[error("slow eigenvalue is not simple at x = {x}")]
    SlowEigenvalueNotSimple { x: f64 },

    #[error("spectral gap between slow and fast modes violated at x = {x}")]
    SpectralGapViolation { x: f64 },

    #[error("viscous solutions do not converge: {reason}")]
    NoViscosityConvergence { reason: String },

    #[error("profile leaves the working neighborhood (sup deviation {sup:e})")]
    LeftNeighborhood { sup: f64 },

    #[error("fixed-point map is not contracting (ratio {ratio} at iteration {iteration})")]
    NoContraction { ratio: f64, iteration: usize },

    #[error("fixed-point iteration did not reach tolerance in {iterations} iterations (last step {last_step:e})")]
    MaxIterExceeded { iterations: usize, last_step: f64 },

    #[error("iterate left the ball: norm {norm:e} > radius {radius:e}")]
    LeftBall { norm: f64, radius: f64 },

    #[error("eigenvalue {re} + {im}i has nonnegative real part")]
    UnstableEigenvalue { re: f64, im: f64 },

    #[error("{count} eigenvalues lie right of the stability threshold, expected only the translation mode")]
    UnstableCount { count: usize },

    #[error("translation eigenvalue not found (lambda = {lambda:e}, correlation {correlation})")]
    TranslationModeMissing { lambda: f64, correlation: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            SingularMatrix { .. } => "SingularMatrix",
            NoConvergence { .. } => "NoConvergence",
            GridTooSmall { .. } => "GridTooSmall",
            DimensionMismatch(_) => "DimensionMismatch",
            NonFiniteState { .. } => "NonFiniteState",
            SubcharacteristicViolation { .. } => "SubcharacteristicViolation",
            EquilibriumBranchUndefined { .. } => "EquilibriumBranchUndefined",
            NewtonDivergence { .. } => "NewtonDivergence",
            AmplitudeTooLarge { .. } => "AmplitudeTooLarge",
            NotGenuinelyNonlinear { .. } => "NotGenuinelyNonlinear",
            EigenvalueNotSimple { .. } => "EigenvalueNotSimple",
            SymmetrizerMissing => "SymmetrizerMissing",
            NoPositiveMargin { .. } => "NoPositiveMargin",
            RankDropInconsistent { .. } => "RankDropInconsistent",
            EigenvalueInStrip { .. } => "EigenvalueInStrip",
            CountMismatch { .. } => "CountMismatch",
            SingularRelaxationBlock { .. } => "SingularRelaxationBlock",
            ShootingDivergence { .. } => "ShootingDivergence",
            WrongLaxCount { .. } => "WrongLaxCount",
            BoundaryProximity { .. } => "BoundaryProximity",
            WeightOverflow { .. } => "WeightOverflow",
            TailBelowFloor { .. } => "TailBelowFloor",
            A11StarSingular { .. } => "A11StarSingular",
            SlowEigenvalueNotSimple { .. } => "SlowEigenvalueNotSimple",
            SpectralGapViolation { .. } => "SpectralGapViolation",
            NoViscosityConvergence { .. } => "NoViscosityConvergence",
            LeftNeighborhood { .. } => "LeftNeighborhood",
            NoContraction { .. } => "NoContraction",
            MaxIterExceeded { .. } => "MaxIterExceeded",
            LeftBall { .. } => "LeftBall",
            UnstableEigenvalue { .. } | UnstableCount { .. } => "UnstableEigenvalue",
            TranslationModeMissing { .. } => "TranslationModeMissing",
            ConfigInvalid(_) => "ConfigInvalid",
            InvalidInput(_) => "InvalidInput",
            Io(_) => "Io",
        }
    }
}
