#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod dd;
pub mod domain;
pub mod error;
pub mod kernel;
pub mod par;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
