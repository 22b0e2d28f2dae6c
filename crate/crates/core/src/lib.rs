//! Solver-free operator learning on manufactured PDE data.
//!
//! The pipeline: sample analytic space-time fields from a separable Fourier
//! family, push them through a governing operator to obtain forcing fields,
//! train a Fourier neural operator on the resulting (forcing, coordinates,
//! initial state) → solution pairs, and evaluate the trained operator with
//! the forcing channel zeroed, where it should reproduce the unforced
//! dynamics of the original equation.

pub mod autodiff;
pub(crate) mod bytes;
pub mod dataset;
pub mod error;
pub mod eval;
pub(crate) mod fft;
pub mod fno;
pub mod grid;
pub mod manufactured;
pub mod pde;
pub mod solvers;
pub mod spectral;
pub mod train;

pub use error::{MmlError, Result};
