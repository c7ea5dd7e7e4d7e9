//! Simulation library for entanglement-backed sensor networks.
//!
//! The crate models a network of nodes sharing multi-qubit resource
//! states from an untrusted source. It provides stabilizer-test
//! verification of those states under declarative adversary models,
//! local phase encoding of node parameters, estimation of linear
//! functions of those parameters from collective parity measurements,
//! and the Fisher-information machinery used to state integrity and
//! privacy guarantees about the whole pipeline.

pub mod adversary;
pub mod encoding;
pub mod error;
pub mod ghz;
pub mod metrology;
pub mod qcore;
pub mod rng;
pub mod sensing;
pub mod tol;
pub mod verification;

pub use error::{Error, Result};
