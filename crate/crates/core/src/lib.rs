//! Maximum-void topological detection of persistent voids in image stacks.

// Index loops read better in the small dense solvers, and `!(x > 0.0)`
// is the NaN-rejecting range check.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filtration;
pub mod maxtest;
pub mod partition;
pub mod pcvr;
pub mod persistence;
pub mod pipeline;
pub mod plot;
pub mod simgen;
pub mod smoothing;
pub mod stack;
pub mod zigzag;

pub use error::{MvError, Result};
