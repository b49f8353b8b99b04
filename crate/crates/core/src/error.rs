use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: expected {allowed}")]
    InvalidParameter {
        name: &'static str,
        value: String,
        allowed: &'static str,
    },
    #[error("outside the domain of the closed-form expression: {0}")]
    DomainError(String),
    #[error("enumeration of {requested} items exceeds the cap of {cap}")]
    ResourceLimit { requested: u128, cap: u64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: impl ToString, allowed: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value: value.to_string(),
            allowed,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
