// `!(a < b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod numkit;
pub mod model;
pub mod ocp;
pub mod pdg;
pub mod certify;
pub mod baselines;
pub mod config;
pub mod harness;
