use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("order {0} is outside the admissible range")]
    OrderDomain(f64),
    #[error("dirac distribution has no pointwise density")]
    NoPointwiseDensity,
    #[error("singular integrand at order node alpha = {alpha}")]
    SingularIntegrand { alpha: f64 },
    #[error("spring ({i}, {j}) does not connect two distinct nodes")]
    SelfSpring { i: usize, j: usize },
    #[error("node {node} outside mesh with {n} intervals")]
    NodeRange { node: usize, n: usize },
    #[error("insufficient constraints: reduced system is singular")]
    InsufficientConstraints,
    #[error("ill-conditioned solve (reciprocal condition estimate {rcond:e})")]
    IllConditioned { rcond: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("coincident particles at x = {0}")]
    Coincident(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
