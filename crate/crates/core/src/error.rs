use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("component {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfSupport {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("sample row {row}, column {col}: {value} lies outside [{lower}, {upper}]")]
    SampleOutOfSupport {
        row: usize,
        col: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("{context}: expected length {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("cost has {count} piece combinations, above the cap of {cap}")]
    PieceExplosion { count: f64, cap: usize },
    #[error("model has {vars} variables and {rows} rows, above the configured caps")]
    ModelTooLarge { vars: usize, rows: usize },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Milp(#[from] drmic_milp::MilpError),
    #[error(transparent)]
    Lp(#[from] drmic_milp::LpError),
    #[error(transparent)]
    Model(#[from] drmic_milp::ModelError),
    #[error("solver finished with status {0:?}")]
    Solve(drmic_milp::SolveStatus),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch {
            context: context.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}
