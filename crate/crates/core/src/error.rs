use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("non-finite values after step {step}")]
    Diverged { step: usize },

    #[error("truncated rank {rank} exceeds the cap {max_rank}; raise max_rank or loosen tau")]
    RankOverflow { rank: usize, max_rank: usize },

    #[error("singular reduced system in {0}")]
    Singular(&'static str),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("config parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        })
    }
}

pub(crate) fn check_shape(
    context: &'static str,
    expected: (usize, usize),
    got: (usize, usize),
) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        })
    }
}
