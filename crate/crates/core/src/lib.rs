//! Exact and approximate earth mover's distances, label-tree metrics and the
//! cophenetic correlation coefficient (CPCC) with analytic subgradients.

pub mod bench;
pub mod cpcc;
pub mod error;
pub mod io;
pub mod measures;
pub mod ot_approx;
pub mod ot_exact;
pub mod trees;

pub use error::{Error, Result};
