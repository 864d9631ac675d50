//! Principal-symbol algebra of the Heisenberg calculus on H_n, with
//! numerical verification of its trace identities.
//!
//! The crate represents a principal symbol by the pair (sigma_+, sigma_-) of
//! evaluators on R^{2n} together with its declared asymptotic tail, computes
//! the regularized trace tau, the evaluation traces tau_z at central points
//! z = (0, s), and the residue trace, and checks the identities relating
//! them to controlled tolerance. A small expression language defines symbols
//! from text, and the sharp (Weyl/Moyal) product of Schwartz symbols is
//! available with a closed-form Gaussian oracle.

pub mod error;
pub mod hgroup;
pub mod quad;
pub mod registry;
pub mod symbols;
pub mod symexpr;
pub mod traces;
pub mod weyl;

pub use error::{Error, Result};
