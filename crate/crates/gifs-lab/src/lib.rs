// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constructions;
pub mod gifs_engine;
pub mod io;
pub mod realization;
pub mod scales;
pub mod symbolic;
