use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rank deficient: rank {rank} < required {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("matrix is singular at tolerance")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("phase index {index} outside alphabet of size {k}")]
    AlphabetViolation { index: usize, k: usize },
    #[error("invalid ADC resolution: {0} bits")]
    InvalidBits(u32),
    #[error("total power must be positive")]
    ZeroPower,
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("leaf evaluation budget of {cap} exceeded")]
    BudgetExceeded { cap: usize },
    #[error("search space of {size} sequences exceeds cap {cap}")]
    SpaceTooLarge { size: u128, cap: u128 },
    #[error("power iteration did not converge")]
    EigFailure,
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_carry_details() {
        let e = Error::SpaceTooLarge { size: 81, cap: 10 };
        assert_eq!(e.to_string(), "search space of 81 sequences exceeds cap 10");
        let io: Error = std::io::Error::new(std::io::ErrorKind::NotFound, "gone").into();
        assert_eq!(io, Error::Io("gone".into()));
    }
}
