//! Time reversal of diffusion processes and continuous-time random walks.
//!
//! The crate simulates forward dynamics, builds the reversed dynamics from
//! the marginal flow (reversed drift for diffusions, reversed intensities
//! for graph walks), evaluates relative-entropy decompositions and checks
//! the underlying identities numerically against closed-form oracles.

pub mod cli;
pub mod density;
pub mod ensemble;
pub mod entropy;
pub mod error;
pub mod field;
pub mod grid;
pub mod models;
pub mod reversal;
pub mod rng;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
