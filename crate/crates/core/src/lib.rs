//! Discrete Wigner functions on the doubled half-integer phase space of an
//! `N`-dimensional system, and the projective Sp(2,ℤ) representation under
//! which their Fano operators are covariant.

pub mod algebra;
pub mod cli;
pub mod error;
pub mod fano;
pub mod representation;
pub mod sp2z;
pub mod verify;
pub mod wigner;

pub use error::{QpsError, Result};
