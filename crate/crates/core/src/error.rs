use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The alternating-sum evaluation lost too many digits to be trusted.
    #[error("unstable evaluation: raw value {value:e}, estimated error {error_estimate:e}")]
    UnstableEvaluation { value: f64, error_estimate: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A gene count would exceed the representable cap.
    #[error("gene count exceeds cap {cap}")]
    Overflow { cap: u64 },

    #[error("cover target can never be met: some success probability is zero")]
    NeverSatisfiable,

    #[error("tree is already balanced")]
    AlreadyBalanced,

    /// No cover after `cap` gene trees; `covered` of `total` species
    /// bipartitions had been seen.
    #[error("no bipartition cover within {cap} gene trees ({covered}/{total} bipartitions seen)")]
    CapExceeded { cap: u64, covered: usize, total: usize },

    #[error("quantile undefined: {capped} of {trials} trials hit the gene cap")]
    QuantileUndefined { capped: usize, trials: usize },

    #[error("newick parse error at byte {position}: {message}")]
    Newick { position: usize, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
