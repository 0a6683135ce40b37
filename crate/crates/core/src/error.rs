use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("field budget exceeded: {requested} fields requested, limit is {limit}")]
    Budget { requested: usize, limit: usize },

    #[error(
        "ambiguous classification: neurons {i} and {j} are {distance:e} apart, inside ({tol:e}, 2*{tol:e}]"
    )]
    Ambiguous {
        i: usize,
        j: usize,
        distance: f64,
        tol: f64,
    },

    #[error("parameters are not a fixed point of the group element (displacement {displacement:e})")]
    NotFixed { displacement: f64 },

    #[error("initial parameters are not on the manifold (distance {distance:e})")]
    NotOnManifold { distance: f64 },

    #[error("flow produced a non-finite state at t = {t}")]
    FlowNonFinite { t: f64, last_good: Vec<f64> },

    #[error("m = {m} is too large for leaf enumeration (max {max})")]
    TooLarge { m: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}
