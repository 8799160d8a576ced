// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bell;
pub mod cli;
pub mod density;
pub mod diagram;
pub mod evaluator;
pub mod forest;
pub mod jet;
pub mod transport;
