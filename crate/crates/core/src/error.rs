use thiserror::Error;

/// Error variants shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Lag requested beyond the stored lags of an explicit covariance model.
    #[error("lag {lag} beyond stored lags ({stored}) and zero-fill not enabled")]
    LagOutOfRange { lag: u64, stored: usize },

    /// A series or constant was requested in a regime where it diverges.
    #[error("regime error: {0}")]
    Regime(String),

    /// Circulant embedding produced a genuinely negative spectrum.
    #[error(
        "circulant embedding failed: most negative eigenvalue {min_eigenvalue:.3e} \
         (threshold {threshold:.3e}, embedding size {embedding_size})"
    )]
    EmbeddingFailure {
        min_eigenvalue: f64,
        threshold: f64,
        embedding_size: usize,
    },

    /// Index range invalid for the given path or sample.
    #[error("index out of range: [{n1}, {n2}) against length {len}")]
    IndexOutOfRange { n1: usize, n2: usize, len: usize },

    /// A computation would exceed its configured cost cap.
    #[error("cost cap exceeded: {0}")]
    CostCap(String),

    /// Blocking subsequence exponent overflows the 62-bit index budget.
    #[error("blocking subsequence overflow: exponent {exponent:.3} exceeds 62 bits at i={i}")]
    BlockingOverflow { exponent: f64, i: usize },

    /// Blocking subsequence indices are not strictly increasing.
    #[error("blocking subsequence degenerate: indices {a} and {b} collide at i={i}")]
    BlockingDegenerate { a: u64, b: u64, i: usize },

    /// Sample vectors disagree in length or dimension.
    #[error("sample mismatch: {0}")]
    SampleMismatch(String),

    /// Empty input where at least one element is required.
    #[error("empty input: {0}")]
    Empty(String),

    /// Density evaluation underflowed inside the support.
    #[error("density underflow inside support at x={x}: f(x)={fx:.3e}")]
    DensityUnderflow { x: f64, fx: f64 },

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
