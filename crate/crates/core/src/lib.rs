//! Numerical laboratory for two-valued minimal Lipschitz graphs.
//!
//! Two-valued functions are sampled on lattices ([`twovalued`]), turned into
//! weighted point clouds ([`varifold`]) and compared against unions of planes
//! and half-planes ([`cones`]) through L² excess functionals ([`excess`]).
//! The pipelines on top fit cones across scales ([`conefit`]), split graphs
//! into sheets ([`decompose`]), classify 2-dimensional links ([`linkclass`])
//! and project blow-up candidates onto the linearized class ([`blowup`]).

// `!(x > 0.0)` guards deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod conefit;
pub mod cones;
pub mod decompose;
pub mod error;
pub mod excess;
pub mod fixtures;
pub mod geometry;
pub mod linalg;
pub mod linkclass;
pub mod par;
pub mod quasi;
pub mod spatial;
pub mod stationarity;
pub mod twovalued;
pub mod varifold;

pub use error::{Error, Result};

/// Library version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
