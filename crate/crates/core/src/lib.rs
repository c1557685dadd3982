// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod graph;
pub mod clique;
pub mod hypothesis;
pub mod bench;
pub mod io;

pub use error::{Error, Result};
