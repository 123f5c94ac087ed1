use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid solver tolerances: {0}")]
    InvalidTolerance(String),

    #[error("rank-one subproblem stayed degenerate after {restarts} re-randomizations")]
    DegenerateAls { restarts: usize },

    #[error("normalization undefined: {0} is zero")]
    UndefinedNormalization(&'static str),

    #[error("invalid decay fit: {0}")]
    InvalidFit(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            found,
        })
    }
}
