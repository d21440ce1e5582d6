//! Absorption paths and sequentially perfect equilibria in quitting games.

pub mod discretize;
pub mod error;
pub mod game;
pub mod io;
pub mod lcp;
pub mod linalg;
pub mod one_shot;
pub mod path;
pub mod scalar;
pub mod strategy;
pub mod synthesis;

pub use error::{Error, Result};
pub use game::{ActionProfile, Matrix, MixedProfile, PlayerId, QuittingGame};
pub use scalar::{Rational, Scalar};
