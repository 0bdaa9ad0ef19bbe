use thiserror::Error;

/// Errors raised by the geometry kernel and the verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the evaluation domain of {surface}")]
    Domain { surface: String, point: [f64; 3] },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("gradient norm {norm:e} is below the regularity threshold at {point:?}")]
    DegenerateGradient { point: [f64; 3], norm: f64 },

    #[error("closest-point iteration did not converge for {point:?} (best residual {residual:e})")]
    Convergence { point: [f64; 3], residual: f64 },

    #[error("point {point:?} is on the medial axis: feet at distance {distance} are {separation:e} apart")]
    MedialAmbiguity {
        point: [f64; 3],
        distance: f64,
        separation: f64,
    },

    #[error("medial cloud has {got} points, at least {need} are required")]
    InsufficientSampling { got: usize, need: usize },

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("offset patch at omega = {omega} is not below the feature size {lfs}")]
    InvalidPatch { omega: f64, lfs: f64 },

    #[error("geodesic did not converge: {0}")]
    GeodesicConvergence(String),

    #[error("trace point {point:?} is near the medial axis: h = {omega} >= 0.9 f = {lfs}")]
    NearMedial { point: [f64; 3], omega: f64, lfs: f64 },

    #[error("pair rejected: eps = {eps} exceeds 1/3")]
    RejectedPair { eps: f64 },

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("analytic feature size is unavailable for {0}")]
    NoAnalyticFeatureSize(String),

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
