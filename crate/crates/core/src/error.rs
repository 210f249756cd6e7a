use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("inconsistent decomposition: Var(psi) = {0:e} is negative")]
    Inconsistent(f64),

    #[error("target {target} not bracketed while searching [{lo}, {hi}] for {what}")]
    NoBracket {
        what: &'static str,
        target: f64,
        lo: f64,
        hi: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("coordinate descent did not converge at lambda index {lambda_index} after {sweeps} sweeps")]
    NonConvergence { lambda_index: usize, sweeps: usize },

    #[error("rank error: {0}")]
    Rank(String),

    #[error("fold too small: {n} instances cannot fill {folds} folds with at least 3 each")]
    FoldTooSmall { n: usize, folds: usize },

    #[error("empty support: precision is undefined without true signals")]
    EmptySupport,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("confounder needs at least 2 levels, found {0}")]
    LevelCount(usize),

    #[error("missing label at row {0}")]
    MissingLabel(usize),

    #[error("column '{0}' is constant and cannot be standardized")]
    ConstantColumn(String),

    #[error("column '{name}' not found; available columns: {available}")]
    MissingColumn { name: String, available: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoBracket { .. } => 2,
            Error::Parse { .. }
            | Error::MissingColumn { .. }
            | Error::ConstantColumn(_)
            | Error::MissingLabel(_)
            | Error::LevelCount(_)
            | Error::Config(_)
            | Error::Csv(_)
            | Error::Dimension(_)
            | Error::Domain(_) => 3,
            _ => 1,
        }
    }
}
