use thiserror::Error;

/// Errors raised by the fleet simulator, the aggregate models and the
/// experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rejection sampling for `{field}` exceeded {budget} draws; truncation range has too little mass")]
    InfeasibleDistribution { field: &'static str, budget: usize },

    #[error("per-step SOC change {delta_soc} reaches the interval width {width}; reduce dt or the interval count")]
    StepTooLarge { delta_soc: f64, width: f64 },

    #[error("state entry {index} went negative ({value:e}) after applying the input")]
    NegativeState { index: usize, value: f64 },

    #[error("switching probability {value} for input {index} is outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },

    #[error("connected fleet size would drop to zero")]
    FleetEmptied,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("baseline series is identically zero")]
    ZeroBaseline,

    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
