//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate box: hi < lo on axis {axis} ({lo} > {hi})")]
    DegenerateBox { axis: usize, lo: i64, hi: i64 },

    #[error("dimension must be >= 2, got {0}")]
    BadDimension(usize),

    #[error("probability must lie in (0,1), got {0}")]
    BadProbability(f64),

    #[error("site {site:?} outside the working box")]
    SiteOutsideBox { site: Vec<i64> },

    #[error("ball of radius {radius} around {center:?} escapes the box")]
    BallEscapesBox { center: Vec<i64>, radius: f64 },

    #[error("start site {site:?} is closed")]
    StartClosed { site: Vec<i64> },

    #[error("empty domain")]
    EmptyDomain,

    #[error("empty target set")]
    EmptyTarget,

    #[error("empty search region")]
    EmptySearchRegion,

    #[error("conditioning event has probability zero")]
    ZeroProbabilityConditioning,

    #[error("conditioning impossible by parity")]
    ParityImpossible,

    #[error("degenerate coarse tiles: floor(eps*rho) = 0 (eps={eps}, rho={rho})")]
    DegenerateTiles { eps: f64, rho: i64 },

    #[error("parameter {name} = {value} outside required range {range}")]
    BadParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("eigensolver did not converge within {matvecs} matvecs (residual {residual:.3e})")]
    SolverDidNotConverge { matvecs: usize, residual: f64 },

    #[error("linear solver did not converge within {iterations} iterations (residual {residual:.3e})")]
    LinearSolveDiverged { iterations: usize, residual: f64 },

    #[error("{0} is not a partition of the ball")]
    NotAPartition(String),

    #[error("no eligible truly-open box near the non-truly-open region")]
    NoEligibleBox,

    #[error("shell experiment has nothing to do: inner ball is clear of obstacles")]
    ShellClear,

    #[error("surgery region not contained in the environment box")]
    RegionOutsideBox,

    #[error("environment file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
