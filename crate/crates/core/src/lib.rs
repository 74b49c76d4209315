//! Agent-based and mean-field simulation of a spatial economy on a torus.
//!
//! Workers move towards higher wages and amenities, subject to moving costs
//! and idiosyncratic noise. The crate provides the N-agent simulator, the
//! aggregation–diffusion PDE describing its large-population limit, and the
//! diagnostics used to compare them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod economy;
pub mod error;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod meanfield;
pub mod microsim;

pub use economy::{compute_fields, EconomyFields, ParamSet};
pub use error::{Error, Result};
pub use grid::{Grid2D, ScalarField, VectorField};
pub use kernels::{ConvolutionMethod, Convolver, DiscreteKernel, KernelFamily, KernelSpec};
