//! Crate-wide error type.

/// Errors produced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is out of its admissible range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An operation received an argument outside its contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A mathematically undefined point was requested (e.g. a quantile at
    /// probability zero).
    #[error("domain error: {0}")]
    Domain(String),

    /// A channel coefficient was exactly zero, where the transceiver scalars
    /// are undefined.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// Two containers that must agree in shape did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A per-symbol gain stream ended before the allocator was done.
    #[error("gain stream truncated: {0}")]
    TruncatedStream(String),

    /// The horizon does not hold enough resource blocks for the required
    /// number of aggregation rounds.
    #[error(
        "infeasible allocation: {required} resource blocks required for model aggregation but \
         only {available} available; at least {min_symbols} OFDM symbols would be needed"
    )]
    Infeasible {
        required: u64,
        available: u64,
        min_symbols: u64,
    },

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("optimization did not converge: {0}")]
    Convergence(String),

    /// A transceiver design violates its power or alignment invariants.
    #[error("transceiver design violation: {0}")]
    DesignViolation(String),

    /// A numeric routine produced a non-finite or otherwise unusable value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Unknown experiment name passed to the registry.
    #[error("unknown experiment '{name}'; known experiments: {known}")]
    UnknownExperiment { name: String, known: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed config file: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
