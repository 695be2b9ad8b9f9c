// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bivariate;
pub mod causal;
pub mod correlation;
pub mod datamodel;
pub mod error;
pub mod harness;
pub mod exec;
pub mod linalg;
pub mod optim;
pub mod ranktest;
pub mod rng;
