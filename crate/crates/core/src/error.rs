//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by
//! failure class so callers (notably the CLI) can map them onto stable exit
//! codes without string matching.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Error raised by graph construction, numerics, file formats or configs.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A tensor shape does not fit the layer it was handed to. Carries the
    /// name of the offending layer so graph-assembly mistakes are findable.
    #[error("shape error in layer `{layer}`: {msg}")]
    Shape { layer: String, msg: String },

    /// An operation was called out of order (e.g. backward before forward).
    #[error("invalid call sequence: {0}")]
    State(String),

    /// A NaN or infinity showed up where only finite values are allowed.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A serialized artifact (dataset, checkpoint, log) failed to parse.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A configuration value is missing, unknown or out of range.
    #[error("config error: {0}")]
    Config(String),

    /// A numeric procedure failed in a way that is not a bug in the caller
    /// (diverged loss, degenerate geometry, empty sample pool, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Shorthand for a shape error attributed to `layer`.
    pub fn shape(layer: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Shape { layer: layer.into(), msg: msg.into() }
    }
}
