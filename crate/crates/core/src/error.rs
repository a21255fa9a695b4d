use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite evaluation at x={x}, p={p}")]
    EvaluationDomain { x: f64, p: f64 },

    #[error("Legendre maximizer reached the search boundary at x={x}, v={v}; increase p_search_radius (currently {radius})")]
    SuperlinearityRadius { x: f64, v: f64, radius: f64 },

    #[error("velocity {velocity} exceeds the window v_max={v_max}")]
    VelocityWindow { velocity: f64, v_max: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("grid resolution cannot certify the result: {0}")]
    Resolution(String),

    #[error("ensemble construction failed: {survivors} of {requested} members survived")]
    Ensemble { survivors: usize, requested: usize },

    #[error("integrator energy drift {drift:e} exceeds the limit {limit:e}")]
    Integrator { drift: f64, limit: f64 },

    #[error("transported set is not a graph at t={0}; the time is beyond the corollary scale")]
    CorollaryScale(f64),

    #[error("quadratic envelope reconstruction error {error:e} above {tolerance:e}; K is too small")]
    KTooSmall { error: f64, tolerance: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
