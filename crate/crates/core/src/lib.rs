//! Upper-tail rate functions for subgraph counts in sparse random graphs:
//! closed forms, explicit constructions, a numerical solver for the
//! discrete variational problem, weak regularity and Monte Carlo estimates.

pub mod checks;
pub mod cli;
pub mod constructions;
pub mod contraction;
pub mod entropy;
pub mod error;
pub mod graphs;
pub mod montecarlo;
pub mod patterns;
pub mod regularity;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
