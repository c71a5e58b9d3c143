use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain. The message names the
    /// offending parameter and the violated constraint.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The policy can never complete a renewal cycle (for example, an age
    /// gate below the smallest possible service time).
    #[error("dead policy: {0}")]
    DeadPolicy(String),

    /// The age gate admits no probability mass: Pr(C + I <= W) = 0.
    #[error("age gate admits no mass: Pr(C + I <= W) = 0")]
    GateNeverPasses,

    /// A single simulated cycle exceeded the event budget. Usually a sign of
    /// a near-degenerate policy that validation could not reject outright.
    #[error("simulated cycle exceeded the event budget of {budget} events")]
    CycleOverflow { budget: u64 },

    /// Every point probed by a search evaluated to +inf.
    #[error("objective has no finite value anywhere on the search grid")]
    NoFiniteValue,

    /// Config file could not be parsed or resolved. The message names the
    /// offending key.
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
