use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown system `{name}` (valid: {valid})")]
    UnknownSystem { name: String, valid: String },

    #[error("duplicate power {0} in coefficient list")]
    DuplicatePower(u32),

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("invalid domain: x_min = {x_min} must be below x_max = {x_max}")]
    InvalidRange { x_min: f64, x_max: f64 },

    #[error("grid needs at least 16 cells, got {0}")]
    TooFewCells(usize),

    #[error("initial point {x0} is within 3 cells of the domain boundary [{x_min}, {x_max}]")]
    X0NearBoundary { x0: f64, x_min: f64, x_max: f64 },

    #[error("tridiagonal solve broke down at row {row} (pivot {pivot:e})")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("probability mass vanished ({mass:e}) at t = {time}")]
    VanishedMass { mass: f64, time: f64 },

    #[error("operator and density live on different grids")]
    GridMismatch,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure at r = {r}, x0 = {x0:?}: {source}")]
    Numerical {
        r: f64,
        x0: Option<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 4,
            Error::SingularSystem { .. }
            | Error::VanishedMass { .. }
            | Error::GridMismatch
            | Error::Numerical { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn at(self, r: f64, x0: Option<f64>) -> Error {
        match self {
            e @ (Error::Numerical { .. } | Error::Io(_)) => e,
            e if e.exit_code() == 3 => Error::Numerical {
                r,
                x0,
                source: Box::new(e),
            },
            e => e,
        }
    }
}
