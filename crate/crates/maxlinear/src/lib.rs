//! Causal discovery and coefficient estimation for recursive
//! max-linear models on directed acyclic graphs.
//!
//! A recursive max-linear model propagates shocks through a DAG by a
//! winner-takes-all maximum over weighted ancestral paths; its
//! distribution is determined by the max-linear coefficient matrix of
//! largest path weights. This crate provides:
//!
//! - max-times (tropical) matrix algebra, path-weight closure and
//!   minimum-DAG extraction by hard thresholding ([`tropical`]);
//! - the generative model with Frechet(2) innovations and exact
//!   closed-form scalings of max-projections, used as the oracle for
//!   every estimator ([`model`]);
//! - empirical counterparts: rank transform to Frechet margins, polar
//!   decomposition, order-statistic thresholding and scaling
//!   estimation ([`tail`]);
//! - causal-order discovery from scalings ([`order`]);
//! - recovery of the squared coefficient matrix from suffix-set
//!   scalings by recursion or a single sparse linear map ([`coeff`]);
//! - structural Hamming distances, graph centroids and edge-stability
//!   scores ([`metrics`]);
//! - an end-to-end pipeline over exceedance and threshold grids, plus
//!   a self-contained validation suite ([`pipeline`]).

pub mod coeff;
pub mod dense;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
pub mod order;
pub mod pipeline;
pub mod projection;
pub mod tail;
pub mod tropical;

pub use error::{Error, Result};
