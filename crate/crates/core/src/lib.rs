//! Equilibrium computation for transmission-constrained networked Cournot
//! electricity markets with a strategic market maker.
//!
//! Generators at each node choose production quantities `q`. A market maker
//! chooses re-balancing quantities `r` (imports are positive) subject to the
//! DC power-flow polytope, maximizing one of three regulatory objectives:
//! social welfare, residual social welfare or consumer surplus. This crate
//! provides
//!
//! - closed-form market quantities ([`model`]),
//! - geometry and quadratic optimization over the feasible re-balancing set
//!   ([`polytope`]),
//! - best responses of both kinds of player ([`responses`]),
//! - generalized Nash equilibrium search, verification and a brute-force
//!   grid oracle ([`equilibrium`]),
//! - the exact analysis of the two-node network ([`twonode`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod equilibrium;
mod error;
mod linalg;
pub mod model;
pub mod polytope;
pub mod responses;
pub mod twonode;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{MarketOutcome, MarketParams, NetworkModel, Objective};
