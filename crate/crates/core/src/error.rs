use thiserror::Error;

/// Failures raised by the model, the operators and the solvers.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mollifier support [{lo}, {hi}]: {reason}")]
    InvalidSupport { lo: f64, hi: f64, reason: &'static str },

    #[error("scaling schedule {kind}: eps = {eps:e} outside admissible range ({bound})")]
    InadmissibleEps { kind: &'static str, eps: f64, bound: String },

    #[error("invalid scaling parameters: {0}")]
    InvalidScaling(String),

    #[error("epsilon grid too short: {len} points, need at least {min}")]
    GridTooShort { len: usize, min: usize },

    #[error("epsilon grid must be sorted strictly decreasing and positive")]
    UnsortedGrid,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("kernel under-resolved: width nu = {nu:e} < 4 dx = {:e} (dx = {dx:e}); refine the grid or enlarge nu", 4.0 * dx)]
    UnderResolved { nu: f64, dx: f64 },

    #[error("delta-net profile under-resolved: width w = {w:e} < 4 dx = {:e}; refine the grid before shrinking eps", 4.0 * dx)]
    ProfileUnderResolved { w: f64, dx: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("time step dt = {dt:e} exceeds the stability bound 0.5 nu/|phi'|_1 = {bound:e}")]
    StepBound { dt: f64, bound: f64 },

    #[error("Picard iteration is not contracting on [{t0}, {t1}] (update grew 5 times in a row); use a shorter subinterval")]
    PicardNonContraction { t0: f64, t1: f64 },

    #[error("Picard iteration exceeded {max_iter} iterations on [{t0}, {t1}] (last update {update:e})")]
    PicardMaxIter { max_iter: usize, t0: f64, t1: f64, update: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidSolver(String),

    #[error("point ({t}, {x}) lies outside the solution window")]
    OutsideWindow { t: f64, x: f64 },

    #[error("save grid too coarse: save step {save_dt:e} > {limit:e}")]
    SaveGridTooCoarse { save_dt: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
