use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("entries {0:?} are not a permutation of 1..=N")]
    InvalidPermutation(Vec<usize>),

    #[error("slot index {index} outside 1..={max}")]
    SlotOutOfRange { index: usize, max: usize },

    #[error("coupling must be finite and strictly positive, got {0}")]
    InvalidCoupling(f64),

    #[error("momentum difference {re}{im:+}i lies within {guard:e} of the S-matrix pole at ic")]
    PoleProximity { re: f64, im: f64, guard: f64 },

    #[error("momentum vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid quadrature budget: {0}")]
    InvalidBudget(String),

    #[error("grid infeasible: {needed} nodes per axis exceed the ceiling of {ceiling}")]
    InfeasibleGrid { needed: usize, ceiling: usize },

    #[error("non-finite integrand value at node {node:?}")]
    NonFinite { node: Vec<usize> },

    #[error("permutation term {sigma:?} has magnitude {magnitude:e}, above 1e6 x identity term {identity:e}")]
    TermOverflow {
        sigma: Vec<usize>,
        magnitude: f64,
        identity: f64,
    },

    #[error("regularized time t - i*eta vanishes; closed forms need t != 0 or eta > 0")]
    ZeroTime,

    #[error("{n} particles exceed the configured maximum of {max}")]
    TooManyParticles { n: usize, max: usize },

    #[error("invalid initial state: {0}")]
    InvalidState(String),

    #[error("cost ceiling exceeded: {0}")]
    CostCeiling(String),

    #[error("lattice: {0}")]
    Lattice(String),

    #[error("linear solve failed: {0}")]
    SolverDivergence(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}
