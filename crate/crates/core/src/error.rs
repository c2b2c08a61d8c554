use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid apparatus: {0}")]
    InvalidApparatus(String),

    #[error("grazing incidence: |v·n| = {dot:.3e} is below 1e-9")]
    GrazingIncidence { dot: f64 },

    #[error("reflected ray from slit {slit} re-enters the diaphragm at x = {x_hit:.4e} m")]
    DiaphragmClearance { slit: u8, x_hit: f64 },

    #[error("point ({x:.6e}, {y:.6e}) is not on the mirror")]
    OffMirror { x: f64, y: f64 },

    #[error("fringe pattern is empty")]
    EmptyPattern,

    #[error("fringe pattern is malformed: {0}")]
    MalformedPattern(String),

    #[error("insufficient samples for a visibility fit: {0}")]
    InsufficientSamples(String),

    #[error("degenerate visibility fit: baseline {baseline:.3e} is not positive")]
    DegenerateFit { baseline: f64 },

    #[error("distinguishability {0} is outside [0, 1]")]
    Distinguishability(f64),

    #[error("scan extent x0 = {x0:.4e} m must exceed 2·F_s = {limit:.4e} m")]
    ScanExtentTooSmall { x0: f64, limit: f64 },

    #[error("clearance angle does not change sign for half-widths in [{lo:.1e}, {hi:.1e}] m; limited by w'")]
    NoBracket { lo: f64, hi: f64 },

    #[error("clearance already violated at the smallest half-width {lo:.1e} m")]
    ClearanceViolated { lo: f64 },

    #[error("invalid scan configuration: {0}")]
    InvalidScan(String),

    #[error("x grids differ: {0}")]
    GridMismatch(String),

    #[error("invalid search space: {0}")]
    InvalidSearchSpace(String),

    #[error("cannot parse hypothesis {0:?}; expected full, exclusive or partial:<D>")]
    ParseHypothesis(String),
}
