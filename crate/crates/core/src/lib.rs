//! Markov chain Hebbian learning over bit-packed ternary weight matrices.
//!
//! The crate is organised bottom-up:
//!
//! * [`ternary`] stores `{-1, 0, +1}` matrices two bits per element and
//!   provides the matrix-vector kernels and the `TWM1` file format.
//! * [`rng`] is the seeded random stream every stochastic routine draws from.
//! * [`engine`] holds the learning rule itself: network energy, activation
//!   probability, update probabilities, write vectors and the per-example
//!   Markov update.
//! * [`mnist`] trains and evaluates bucketed digit classifiers layer by layer.
//! * [`arithmetic`] memorizes a multiplication table and uses the transposed
//!   matrix for divisor retrieval and iterative prime factorization.

pub mod arithmetic;
pub mod engine;
mod error;
pub mod mnist;
pub mod rng;
pub mod ternary;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use ternary::TernaryMatrix;
