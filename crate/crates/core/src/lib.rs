#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channels;
pub mod diffusion;
pub mod dmnet;
pub mod error;
pub mod harness;
mod io;
pub mod numerics;

pub use error::{Error, Result};
