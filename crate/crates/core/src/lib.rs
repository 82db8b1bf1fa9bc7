//! Simulation and privacy accounting for token-walk protocols under network
//! differential privacy.
//!
//! A single token walks over a directed ring or a complete graph and is
//! updated by each user holding it. Each user only sees the token values it
//! receives, and that restricted view amplifies the local guarantees.
//!
//! Module map:
//! - [`walk`]: users, topologies, walk traces and cycle decomposition.
//! - [`mechanisms`]: Gaussian/Laplace perturbation and L-ary randomized response.
//! - [`accountant`]: closed-form bounds (composition, amplification, RDP chains).
//! - [`protocols`]: executable ring/complete-graph summation, histogram and SGD walks.
//! - [`empirical`]: per-pair privacy loss replayed on sampled walks.
//! - [`dpml`]: logistic regression under Local / Network / Centralized DP-SGD.
//! - [`experiments`]: drivers behind the `netdp` command line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod budget;
pub mod dpml;
pub mod empirical;
pub mod error;
pub mod experiments;
pub mod mechanisms;
pub mod protocols;
pub mod rng;
pub mod walk;

pub use budget::PrivacyBudget;
pub use error::{Error, Result};
pub use rng::RngContract;
pub use walk::{Topology, TopologyKind, WalkTrace};
