use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design is rank deficient: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("all regression weights are zero")]
    AllZeroWeights,
    #[error("negative regression weight at row {0}")]
    NegativeWeight(usize),
    #[error("instrument/regressor cross moment is singular")]
    SingularCrossMoment,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("linear operator is singular")]
    SingularOperator,

    #[error("sample is degenerate (zero variance)")]
    DegenerateSample,
    #[error("sample too small: {got} < {need}")]
    SampleTooSmall { got: usize, need: usize },
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSd(f64),
    #[error("grids differ")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid transition matrix: {0}")]
    InvalidTransition(String),
    #[error("autoregressive coefficient {0} is explosive")]
    ExplosiveRho(f64),
    #[error("savings rate {0} is explosive")]
    ExplosivePhi(f64),
    #[error("simulation exploded at t = {0}")]
    ExplosiveSimulation(usize),
    #[error("solver did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("group probabilities are invalid: {0}")]
    InvalidProbabilities(String),

    #[error("horizon must be non-negative, got {0}")]
    NegativeHorizon(i64),
    #[error("horizon {got} exceeds the enumeration limit {max}")]
    HorizonTooLarge { got: usize, max: usize },
    #[error("horizon {0} leaves no usable observations")]
    HorizonExceedsSample(usize),
    #[error("panel lacks latent column `{0}`")]
    MissingLatents(String),
    #[error("no compliers in the sample")]
    NoCompliers,

    #[error("sample too short: {rows} usable rows for horizon {horizon}")]
    SampleTooShort { rows: usize, horizon: usize },
    #[error("interaction terms are degenerate")]
    DegenerateInteraction,
    #[error("weak first stage: |t| = {t_stat:.3} below {threshold}")]
    WeakFirstStage { t_stat: f64, threshold: f64 },
    #[error("panel has no instrument column")]
    MissingInstrument,
    #[error("state {state} has {got} usable rows, need {need}")]
    InsufficientStateObservations { state: usize, got: usize, need: usize },
    #[error("Markov chain has {chain} states but the model has {model}")]
    StateSpaceMismatch { chain: usize, model: usize },
    #[error("backshifted model sequence is inconsistent: {0}")]
    ModelSequenceMismatch(String),
    #[error("state {0} is not part of the model")]
    UnknownState(usize),
    #[error("unsupported interaction for this operation: {0}")]
    UnsupportedSpec(String),

    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
