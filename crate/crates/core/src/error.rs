use thiserror::Error;

/// Errors surfaced by model construction, oracles and the particle engine.
#[derive(Error, Debug)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent configuration (bounds, masses, tolerances).
    #[error("configuration error: {0}")]
    Config(String),

    /// Hard particle cap reached; the population state is left at `time_reached`.
    #[error("particle capacity {cap} exceeded at t = {time_reached} ({count} particles)")]
    Capacity {
        time_reached: f64,
        count: usize,
        cap: usize,
    },

    /// The analytic layer cannot evaluate this model (e.g. non-constant
    /// Feynman-Kac rate outside the ground-state-transform route).
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// No closed-form eigendata registered for this model.
    #[error("no spectral data: {0}")]
    NoSpectralData(String),

    /// A numerical routine produced an unusable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
