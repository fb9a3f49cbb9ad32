use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid ring radii: inner {inner} m must be positive and below outer {outer} m")]
    InvalidRing { inner: f64, outer: f64 },

    #[error("grid scenario needs a perfect-square number of near-field users, got {0}")]
    NotSquare(usize),

    #[error("user coincides with the array centre")]
    ZeroDistance,

    #[error("{kind} user at {distance:.3} m violates the Rayleigh boundary {rayleigh:.3} m")]
    RegionViolation {
        kind: &'static str,
        distance: f64,
        rayleigh: f64,
    },

    #[error("channel matrix is ill-conditioned (Gram condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cannot schedule {k} users with {dx} beams each on {m} beams")]
    TooManyBeams { k: usize, dx: usize, m: usize },

    #[error("beam {beam} cannot meet the near-field rate target within the per-beam budget")]
    QosInfeasible { beam: usize },

    #[error("degenerate linearization for far-field user {user}: zero SINR with active coefficients")]
    DegenerateExpansion { user: usize },

    #[error("empty beam set")]
    EmptyBeamSet,

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("method {method} is not applicable: {reason}")]
    MethodNotApplicable { method: String, reason: String },

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
