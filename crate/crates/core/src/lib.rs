#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod eim;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod offline;
pub mod online;
pub mod truth;

pub use error::{Error, Result};
