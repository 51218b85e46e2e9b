//! Numerical toolkit for half-line Jacobi matrices whose essential spectrum is a
//! finite union of closed intervals.

pub mod asymptotics;
pub mod diskmodel;
pub mod error;
pub mod gapset;
pub mod jacobi;
pub mod quad;
pub mod spectra;
pub mod sumrule;

pub use error::{FgjError, Result};
