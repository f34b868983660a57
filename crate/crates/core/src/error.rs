//! Crate-wide error type.

/// Errors raised while parsing STEP text or interpreting the entity table.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unterminated string literal starting at byte {offset}")]
    UnterminatedString { offset: usize },

    #[error("malformed escape sequence at byte {offset}")]
    BadEscape { offset: usize },

    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    #[error("missing {section} section")]
    MissingSection { section: &'static str },

    #[error("duplicate entity id #{id} (first at byte {first}, again at byte {second})")]
    DuplicateId { id: u64, first: usize, second: usize },

    #[error("dangling reference #{from} -> #{to}")]
    DanglingRef { from: u64, to: u64 },

    #[error("entity #{0} not found")]
    NoSuchEntity(u64),

    #[error("attribute index {index} out of range for #{id} ({len} attributes)")]
    IndexOutOfRange { id: u64, index: usize, len: usize },

    #[error("cyclic placement chain through #{0}")]
    CyclicPlacement(u64),

    #[error("non-orthogonal placement axes at #{0}")]
    NonOrthogonal(u64),

    #[error("invalid fixture dimensions: {0}")]
    InvalidDimensions(String),
}

pub type Result<T> = std::result::Result<T, Error>;
