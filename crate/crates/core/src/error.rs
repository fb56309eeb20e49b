use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("instance failed validation: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("tape does not match model: {0}")]
    StaleTape(String),

    #[error("unbounded input box for variable {0}")]
    UnboundedBox(usize),

    #[error("empty feasible set: {0}")]
    EmptyFeasibleSet(String),

    #[error("subproblem infeasible at iteration {iteration}: {what}")]
    SubproblemInfeasible { iteration: usize, what: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
