//! Causal modelling with acyclic directed mixed graphs (ADMGs).
//!
//! An ADMG carries three edge relations over one node set: directed (`->`),
//! undirected (`--`) and bidirected (`<->`), with an acyclic directed part and
//! at most one edge per relation per pair. The crate provides:
//!
//! * graph algebra: relatives, induced and marginal subgraphs ([`graph`]),
//! * separation queries via the path and route criteria, and graph
//!   magnification ([`sep`]),
//! * intervention surgery and edge filters ([`surgery`]),
//! * causal-effect identification: calculus rules, back-door, front-door and
//!   Q-decomposition criteria producing symbolic estimands ([`identify`],
//!   [`estimand`]),
//! * a linear-Gaussian structural equation oracle ([`sem`]),
//! * exact structure learning from (in)dependence facts ([`learn`]),
//! * gated models switching between context graphs ([`gated`]).

pub mod cli;
pub mod error;
pub mod estimand;
pub mod gated;
pub mod graph;
pub mod identify;
pub mod learn;
pub mod sem;
pub mod sep;
pub mod surgery;

pub use error::Error;
pub use graph::{Admg, NodeSet};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
