//! Numerical core for measuring how global-bank net-worth shocks propagate
//! to emerging-market credit: an equilibrium model of a leverage-constrained
//! bank, sign-restricted identification of high-frequency surprises, a
//! pooled Bayesian panel VAR, panel local projections (OLS and IV), and
//! high-dimensional fixed-effect regressions on loan-level data, together
//! with synthetic data generators that carry known ground truth.
//!
//! The crate is `no_std` with `alloc`; IO and command-line handling live in
//! the companion `netshock` crate.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

mod error;

pub mod calendar;
pub mod cluster;
pub mod linalg;
pub mod lp;
pub mod micro;
pub mod model;
pub mod panel;
pub mod rng;
pub mod shocks;
pub mod spline;
pub mod stats;
pub mod synth;
pub mod var;

pub use error::{Error, Result};
