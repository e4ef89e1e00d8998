// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod deform;
pub mod error;
pub mod mesh;
pub mod output;
pub mod pipeline;
pub mod seeding;
pub mod shapes;
pub mod voxel;

pub use error::{Error, Result};
