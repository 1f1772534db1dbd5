use std::io;

use crate::hierarchy::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty log")]
    EmptyLog,

    #[error("invalid activity: {0}")]
    InvalidActivity(String),

    #[error("XES parse error at line {line}: {message}")]
    Xes { line: usize, message: String },

    #[error("CSV error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("mapping error at line {line}: {message}")]
    Mapping { line: usize, message: String },

    #[error("invalid hierarchy: {}", format_violations(.0))]
    InvalidHierarchy(Vec<Violation>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate DFG: no outgoing edge from the start node")]
    DegenerateDfg,

    #[error("budget/pruning eliminated all variants")]
    AllVariantsPruned,

    #[error("inconsistent partition: {0}")]
    Partition(String),

    #[error("PNML error: {0}")]
    Pnml(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
