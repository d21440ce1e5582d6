use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid mixed profile: {0}")]
    InvalidProfile(String),

    #[error("mixed profile never absorbs (p(xi) = 0)")]
    DegenerateProfile,

    #[error("invalid absorption path: {0}")]
    InvalidPath(String),

    #[error("strategy profile is not absorbing: {0}")]
    NonAbsorbing(String),

    #[error("payoff path undefined at t = {t}: total absorption already reached")]
    UndefinedAtOne { t: f64 },

    #[error("no LCP solution: {0}")]
    NoLcpSolution(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("flow diverges: no coordinate reaches zero and the state is not stationary")]
    Divergence,

    #[error("synthesis budget exhausted after {events} events and {backtracks} backtracks")]
    BudgetExhausted { events: usize, backtracks: usize },

    #[error("discretization hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
