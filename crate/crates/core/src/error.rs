use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incoherence target infeasible: declared mu0 = {declared}, best achieved = {best}")]
    InfeasibleIncoherence { declared: f64, best: f64 },

    #[error("spectral target infeasible: declared mu1 = {declared}, measured = {measured}")]
    InfeasibleSpectralNorm { declared: f64, measured: f64 },

    #[error("{count} supports exceed the enumeration limit of {limit}")]
    TooLargeToEnumerate { count: u128, limit: u128 },

    #[error("threshold rho = {rho} is not positive; largest admissible sparsity is {max_sparsity}")]
    InvalidRegime { rho: f64, max_sparsity: usize },

    #[error("({0}, {1}) is not an edge of the correlation graph")]
    NotAnEdge(usize, usize),

    #[error("candidate cluster has {size} samples, need at least {min}")]
    ClusterTooSmall { size: usize, min: usize },

    #[error("empty cluster")]
    EmptyCluster,

    #[error("no dictionary elements recovered after {edges} anchor edges")]
    NoAtomsRecovered { edges: usize },

    #[error("selected sub-dictionary is ill-conditioned (condition number {cond:.3e})")]
    IllConditionedSupport { cond: f64 },

    #[error("coefficient Gram matrix is singular (sigma_min / sigma_max = {ratio:.3e})")]
    SingularGram { ratio: f64 },

    #[error("edge guarantees do not apply: threshold interval ({lower}, {upper}) is empty")]
    RegimeNotApplicable { lower: f64, upper: f64 },

    #[error("no anchor edges to sample")]
    EmptySample,

    #[error("stage `{0}` requires a stage that was not run")]
    MissingStage(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

impl Error {
    /// Short stable name used in report rows.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InfeasibleIncoherence { .. } => "InfeasibleIncoherence",
            Error::InfeasibleSpectralNorm { .. } => "InfeasibleSpectralNorm",
            Error::TooLargeToEnumerate { .. } => "TooLargeToEnumerate",
            Error::InvalidRegime { .. } => "InvalidRegime",
            Error::NotAnEdge(..) => "NotAnEdge",
            Error::ClusterTooSmall { .. } => "ClusterTooSmall",
            Error::EmptyCluster => "EmptyCluster",
            Error::NoAtomsRecovered { .. } => "NoAtomsRecovered",
            Error::IllConditionedSupport { .. } => "IllConditionedSupport",
            Error::SingularGram { .. } => "SingularGram",
            Error::RegimeNotApplicable { .. } => "RegimeNotApplicable",
            Error::EmptySample => "EmptySample",
            Error::MissingStage(_) => "MissingStage",
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
