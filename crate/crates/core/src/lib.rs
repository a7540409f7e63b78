//! Hypergradients of bilevel problems through truncated back-propagation.
//!
//! The lower problem is solved by `T` steps of a differentiable dynamical
//! system; the crate computes the gradient of the upper objective through
//! those steps exactly (forward or reverse mode, optionally checkpointed) or
//! approximately (truncated reverse mode, Neumann series, implicit CG), and
//! drives an outer optimizer with the result.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod hypergrad;
pub mod num;
pub mod outer;
pub mod par;
pub mod problems;

pub use error::{Error, Result};
