//! Construction and verification of small-amplitude standing shock profiles
//! for semilinear relaxation systems `A U' = Q(U)`.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod chapman_enskog;
pub mod error;
pub mod grid;
pub mod linearized;
pub mod model;
pub mod numerics;
pub mod solver;
pub mod spaces;
pub mod stability;
pub mod structure;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
