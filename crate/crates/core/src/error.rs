use thiserror::Error;

/// Errors raised across the crate. Variant names follow the failure they
/// report, not the module that raised them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("boundary matrix is rank deficient: sigma_min/sigma_max = {ratio:.3e}")]
    RankDeficient { ratio: f64 },

    #[error("too few boundary points: m = {m} < n = {n}")]
    TooFewPoints { m: usize, n: usize },

    #[error("point {value} outside [0,1]")]
    PointOutOfRange { value: f64 },

    #[error("boundary points contain duplicates (t = {value})")]
    UnsortedDuplicatePoints { value: f64 },

    #[error("coefficient a_{index} is not finite at t = {t}")]
    NonFiniteCoefficient { index: usize, t: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("problem file parse error: {0}")]
    Parse(String),

    #[error("integration overflow: |entry| exceeded {guard:.1e} at t = {t}")]
    IntegrationOverflow { t: f64, guard: f64 },

    #[error("well-posedness verdict disagrees across reference points {dets:?}")]
    InconsistentVerdict { dets: [f64; 3] },

    #[error("problem is not well-posed: |det J| = {det:.3e} below threshold {threshold:.3e}")]
    NotWellPosed { det: f64, threshold: f64 },

    #[error("expected {expected} conditions, got {got}")]
    ConditionCountMismatch { expected: usize, got: usize },

    #[error("requested basis columns {columns:?} form a singular minor")]
    SingularBasis { columns: Vec<usize> },

    #[error("pair ({a}, {b}) is singular: system ({system}) determinant {det:.3e}")]
    SingularPair { a: f64, b: f64, system: u8, det: f64 },

    #[error("pair ({a}, {b}) is not preserved by the boundary operator")]
    NotPreserved { a: f64, b: f64 },

    #[error("endpoint t = {t} lies in the support of the boundary operator")]
    EndpointInSupport { t: f64 },

    #[error("time {t} is not a grid node")]
    GridMismatch { t: f64 },

    #[error("support times must include every boundary point (missing t = {t})")]
    SupportNotCovered { t: f64 },

    #[error("perturbed problem at N = {n} is not well-posed")]
    PerturbedNotWellPosed { n: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
