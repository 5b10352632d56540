//! Sum-product-quotient networks (SPQNs).
//!
//! An SPQN is a rooted DAG of indicator, weighted-sum, product and quotient
//! nodes over binary variables. Quotient nodes let a sub-graph represent a
//! conditional distribution, which allows products of children with
//! overlapping scopes while keeping exact inference tractable.
//!
//! The crate is `no_std` (with `alloc`) when built without the `std`
//! feature. File formats and the command-line tool live in the `spqn`
//! companion crate.
//!
//! Module map:
//!
//! * [`graph`] and [`scope`]: the network, its builder, topological order and
//!   general/effective/conditional scopes.
//! * [`validate`]: structural tractability checks and the enumeration-based
//!   soundness check.
//! * [`eval`]: log-space evaluation with marginalized (`*`) evidence.
//! * [`sample`]: ancestral sampling, optionally conditioned on observed values.
//! * [`train`]: reverse-mode gradients of the log-likelihood and Adam.
//! * [`builders`]: leaf CMOs, general CMOs, 1-D convolutional SPQNs, the
//!   triangle-free-graph SPQN and random valid-CMO networks.
//! * [`dataset`] and [`oracle`]: the synthetic path dataset and the
//!   brute-force distribution oracle.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod builders;
pub mod dataset;
mod error;
pub mod eval;
pub mod evidence;
pub mod graph;
pub mod math;
pub mod model;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod sample;
pub mod scope;
pub mod train;
pub mod validate;
pub mod varset;

pub use error::{Error, Result};
pub use eval::{evaluate, evaluate_trace, mean_log_likelihood, EvalTrace, LogValue};
pub use evidence::{Evidence, Value};
pub use graph::{BlockId, Network, NetworkBuilder, Node, NodeId};
pub use model::Model;
pub use params::ParamVector;
pub use scope::ScopeTable;
pub use validate::{CmoAnnotation, Rule, ValidationReport, Violation};
pub use varset::VarSet;
