use thiserror::Error;

use crate::paramgen::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus mismatch between operands")]
    ModulusMismatch,
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),
    #[error("element is not invertible")]
    NotInvertible,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("exponent must be positive")]
    ZeroExponent,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid public parameters: {}", join_violations(.0))]
    InvalidParams(Vec<Violation>),
    #[error("gave up after {attempts} attempts: {what}")]
    RetryLimit { what: &'static str, attempts: usize },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("attack inapplicable: {0}")]
    AttackInapplicable(String),
    #[error("not found within bound")]
    NotFound,
    #[error("not enough samples: need at least {needed} trials, have {have}")]
    Undersampled { needed: u64, have: u64 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("unexpected message: expected {expected}, got {got}")]
    OutOfOrder { expected: &'static str, got: String },
    #[error("key confirmation failed: digests differ")]
    KeyMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}
