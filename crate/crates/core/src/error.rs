use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("function value is not finite when perturbing coordinate {index}")]
    NonFiniteEvaluation { index: usize },

    #[error("conjugate gradient broke down at iteration {iteration}: direction curvature {curvature:e}")]
    CgBreakdown { iteration: usize, curvature: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("lower-level iterate diverged at step {step}")]
    Divergence { step: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("forward-mode carrier needs {required} entries, over fmd_cap = {cap}")]
    Capacity { cap: usize, required: usize },

    #[error("lower-level Hessian is not positive definite at the solution (CG breakdown at iteration {iteration}, curvature {curvature:e})")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("IDX: bad magic number {found:#010x}, expected {expected:#010x}")]
    IdxMagic { expected: u32, found: u32 },

    #[error("IDX: file truncated (needed {needed} bytes, found {found})")]
    IdxTruncated { needed: usize, found: usize },

    #[error("IDX: dimension product overflows")]
    IdxOverflow,

    #[error("I/O error: {0}")]
    Io(String),

    #[error("hyper-iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
