use thiserror::Error;

/// Errors raised anywhere in the goal-to-SMT pipeline.
///
/// The CLI maps these onto exit codes: translation-side errors
/// (parse, hint, expansion, substitution, emit, guard) exit 2,
/// solver-side failures exit 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("hint error: {0}")]
    Hint(String),

    #[error("expansion error: {0}")]
    Expansion(String),

    #[error("substitution error: {0}")]
    Substitution(String),

    #[error("emit error: {0}")]
    Emit(String),

    #[error("guard error: {0}")]
    Guard(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code class for the CLI: 2 = usage/translation, 3 = solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver(_) => 3,
            _ => 2,
        }
    }
}
