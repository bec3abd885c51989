//! Dense tensor algebra and low-rank approximation.
//!
//! The crate provides a dense tensor type with the elementary reorganizations
//! (permutation, slicing, reshaping, matricization, contraction), matrix
//! products and SVD tooling, and three approximation engines:
//!
//! - [`cp`]: sums of rank-one terms fitted by alternating least squares,
//! - [`tucker`]: HOSVD and HOOI,
//! - [`tt`]: tensor trains with TT-SVD, in-format arithmetic and rounding.
//!
//! [`funcgrid`] discretizes functions on Cartesian grids, producing tensors
//! of known low rank, [`io`] reads and writes the file formats and [`cli`]
//! backs the `lowrank` binary.

pub mod cli;
pub mod contraction;
pub mod cp;
pub mod error;
pub mod funcgrid;
pub mod io;
pub mod matrix;
pub mod tensor;
pub mod tt;
pub mod tucker;

pub use error::{Result, TensorError};
pub use tensor::{DenseTensor, MultiIndex, Norm, Permutation};
