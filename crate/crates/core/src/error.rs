use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QciError {
    #[error("point {0:?} lies outside the model chart")]
    OutOfChart(Vec<f64>),
    #[error("operation not supported for this model: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),

    // classical
    #[error("energy shell over the base point is empty")]
    EmptyShell,
    #[error("base point r = {0} is at a pole; the energy shell parametrization degenerates")]
    PoleSingularity(f64),
    #[error("e1 = {0} is not a regular value of p1")]
    NotRegularLevel(f64),

    // spectral
    #[error("eigen-iteration failed to converge after {0} iterations")]
    SolverDivergence(usize),
    #[error("no sign change of the matching function for branches ({j}, {k})")]
    NoBracket { j: i64, k: i64 },
    #[error("sparse linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("region does not meet the chart")]
    EmptyRegion,

    // action
    #[error("integrand is negative ({value:e}) at s = {at}")]
    NegativeIntegrand { at: f64, value: f64 },
    #[error("adaptive quadrature stalled: error estimate {estimate:e} after {intervals} subintervals")]
    QuadratureStall { estimate: f64, intervals: usize },
    #[error("point {0:?} lies in the classically allowed region")]
    AllowedRegion(Vec<f64>),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    // asymptotics
    #[error("no eigenvalues in the spectral window at h = {0}")]
    EmptySpectrum(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("|u| underflows on {fraction:.0}% of the region", fraction = 100.0 * .0)]
    UnderflowRegion(f64),

    // fbi
    #[error("transform under-resolved: spacing {spacing:e} exceeds {limit:e}")]
    UnderResolved { spacing: f64, limit: f64 },
    #[error("transform values underflow: only {0} usable h values")]
    Floor(usize),
}

pub type Result<T> = std::result::Result<T, QciError>;
