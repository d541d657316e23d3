#![no_std]
// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
extern crate alloc;

pub mod bc;
pub mod error;
pub mod evolve;
pub mod fft;
pub mod fold;
pub mod fresnel;
pub mod harness;
pub mod jost;
pub mod kernels;
pub mod linalg;
pub mod par;
pub mod potential;
mod quad;
pub mod spectrum;
pub mod state;

pub use error::{Error, Result};
