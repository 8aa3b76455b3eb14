//! Finite-truncation spectral triples over graph holonomy algebras.
//!
//! The crate builds, for compact groups U(1), SU(2) and finite products:
//! the basic Dirac operator on a truncated Peter-Weyl decomposition, graph
//! refinement systems with nested free generating sets, holonomy
//! multiplication operators, assembled graph spectral triples with
//! level weights, heat-trace and theta-summability certificates, and
//! numerically evaluated JLO cocycle components.

pub mod cli;
pub mod clifford;
pub mod dirac;
pub mod graph;
pub mod holonomy;
pub mod error;
pub mod jlo;
pub mod lie;
pub mod summability;
pub mod triple;

pub use error::{Error, Result};
