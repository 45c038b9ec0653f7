use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("boundary is not star-shaped about the center: {crossings} crossings along the ray at theta = {theta}")]
    NotStarShaped { theta: f64, crossings: usize },

    #[error("no boundary crossing found along the ray at theta = {theta}")]
    NoCrossing { theta: f64 },

    #[error("need at least {needed} boundary samples for {modes} Fourier modes, got {got}")]
    TooFewSamples {
        needed: usize,
        modes: usize,
        got: usize,
    },

    #[error("radial map is not positive at theta = {theta} (f = {value})")]
    NonPositiveRadius { theta: f64, value: f64 },

    #[error("degenerate tangent at theta = {theta}; the boundary parameterization is bad")]
    DegenerateTangent { theta: f64 },

    #[error("Newton iteration for arc-length segment {segment} did not converge")]
    ArcLengthNewton { segment: usize },

    #[error("singular coordinate Jacobian at rho = {rho}, theta = {theta}")]
    SingularJacobian { rho: f64, theta: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error(
        "Picard iteration hit the cap of {iterations} iterations (last residual {residual:e})"
    )]
    PicardCap { iterations: usize, residual: f64 },

    #[error("Picard iteration stagnated at residual {residual:e} after {iterations} iterations")]
    PicardStagnation { iterations: usize, residual: f64 },

    #[error("expansion center for target {target} lies inside the domain")]
    CenterInside { target: usize },

    #[error("boundary frame convention violated at point {index}")]
    FrameConvention { index: usize },

    #[error("boundary fields are sampled on different grids")]
    GridMismatch,

    #[error("shaping system is singular for eps = {eps}, delta = {delta}, kappa = {kappa}")]
    SingularShaping { eps: f64, delta: f64, kappa: f64 },

    #[error("major radius must be positive, got x = {0}")]
    NonPositiveMajorRadius(f64),

    #[error("no sign change of dpsi/dx along the midplane chord")]
    AxisNotBracketed,

    #[error("invalid problem parameters: {0}")]
    InvalidParameters(String),

    #[error("need at least 3 usable points to fit a convergence order, got {0}")]
    TooFewPoints(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
