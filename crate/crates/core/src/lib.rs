//! LQR tracking control augmented with an online-trained residual network,
//! plus baselines, plants and experiment tooling.

// `!(x > 0.0)` is used on purpose so NaN lands on the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dataset;
pub mod experiment;
pub mod gp;
pub mod linalg;
pub mod mlp;
pub mod plant;
