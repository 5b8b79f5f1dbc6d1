// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
mod blur;
pub mod codec;
pub mod detect;
pub mod error;
pub mod geom;
pub mod pose;
pub mod render;

pub use error::{Error, Result};
