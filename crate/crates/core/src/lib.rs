//! Simulation and numerics for time-inhomogeneous splitting trees.
//!
//! A splitting tree is a chronological tree in which every individual gives
//! birth at rate `b(t)` during its life and each newborn draws its lifetime
//! from a kernel `K(t, ·)` that depends on the absolute birth time `t`. The
//! crate covers:
//!
//! * [`model`]: birth rates and lifetime kernels,
//! * [`tree`]: truncated tree simulation and structural queries,
//! * [`contour`]: the jump chronological contour process, built from a tree
//!   or simulated directly as a piecewise-deterministic Markov process,
//! * [`scale`]: the scale function, hitting and extinction probabilities,
//!   population laws,
//! * [`criticality`]: drift criteria and tree-length tails,
//! * [`conditioning`]: h-transformed parameters and conditioned simulation,
//! * [`scaling`]: the rescaled contour and its Bessel limit.
//!
//! The crate is `no_std` and only needs `alloc`. Replica-parallel work goes
//! through the [`replicas::Replicas`] trait so that a std front end can plug in
//! a thread pool without changing results.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]
// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod conditioning;
pub mod contour;
pub mod criticality;
mod error;
pub mod model;
pub mod quad;
pub mod replicas;
pub mod rng;
pub mod scale;
pub mod scaling;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
