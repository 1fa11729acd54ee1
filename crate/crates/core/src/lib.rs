//! Simultaneous distributed and boundary optimal control of the heat equation
//! on the unit square, for a mixed Dirichlet/Neumann system and its
//! Robin/Neumann approximation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod report;
pub mod state;

pub use error::{Error, Result};
