use thiserror::Error;

/// Errors produced by the model, the solvers and the I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("argument outside its domain: {0}")]
    Domain(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("transport problem too large: {size} nodes exceeds the cap of {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("transport problem unbalanced: supply {supply} vs demand {demand}")]
    Unbalanced { supply: f64, demand: f64 },

    #[error("dual solver did not converge after {} iterations (gap {}, mass residual {})", .0.iterations, .0.gap, .0.mass_residual)]
    NotConverged(Box<crate::dual::SolveReport>),

    #[error("support bound violated at step {step}: radius {radius} > bound {bound}")]
    SupportBound { step: usize, radius: f64, bound: f64 },

    #[error("transport step bound violated at step {step}: W1 {distance} > {bound}")]
    StepBound { step: usize, distance: f64, bound: f64 },

    #[error("time-horizon precondition violated: {0}")]
    Precondition(String),

    #[error("atom {index} left the admissible quadrant at step {step}")]
    LeftDomain { step: usize, index: usize },

    #[error("empty cell for atom {0}")]
    EmptyCell(usize),

    #[error("surrogate potential has gradient outside the admissible range")]
    Surrogate,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
