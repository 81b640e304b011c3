//! Certified sparse-recovery bounds for sensing matrices.
//!
//! Given a measurement matrix `A`, the crate bounds the largest ratio
//! `||x||_2 / ||x||_1` over the nullspace of `A` — the radius of the section
//! of the l1 ball cut out by the nullspace — using a linear-programming lower
//! bound, semidefinite and linear relaxations for the upper side, and
//! Monte-Carlo geometric estimators. Each bound converts into certified
//! recovery cardinalities for l1 decoding, plus probabilistic guarantees for
//! random signals.

pub mod certify;
pub mod conic;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod recover;
pub mod rng;
pub mod weak;

pub use error::{Error, Result};
