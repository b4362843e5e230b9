//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by graph construction, compilation, integration and analysis.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A graph, config or state violates a structural invariant.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A physical or numerical parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The pump does not exceed the linear losses; no condensate forms.
    #[error("below threshold: {0}")]
    BelowThreshold(String),

    /// The integrator produced a non-finite amplitude.
    #[error("divergence at t = {time}: mode {mode} is non-finite")]
    Divergence { mode: usize, time: f64 },

    /// A spin mode is too dim to carry a well-defined phase.
    #[error("empty condensate: spin site {site} has intensity {intensity:.3e}")]
    EmptyCondensate { site: usize, intensity: f64 },

    /// A quantity is undefined for the given input (e.g. statistics of an all-zero state).
    #[error("undefined: {0}")]
    Undefined(String),

    /// Problem size exceeds what the exact solvers can enumerate.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Malformed input file or run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A pulsed run aborted mid-protocol.
    #[error("pulse {pulse} aborted: {source}")]
    PulseAborted { pulse: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
