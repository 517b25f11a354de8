//! Simulation and verification tools for the tug-of-war game with noise.
//!
//! The crate is organised by subsystem:
//!
//! - [`game`], [`domain`] and [`strategy`]: the stochastic game itself, the
//!   domains it is played on and the strategies the two players use.
//! - [`cylinder`]: the auxiliary cylinder walk assembled from a vertical
//!   walk, a horizontal walk and a Bernoulli clock.
//! - [`density`] and [`special`]: densities of sums of uniform-in-ball
//!   vectors, Bessel functions and their zeros, quadrature.
//! - [`bounds`]: closed-form right-hand sides of the concentration and tail
//!   inequalities together with the derived constants.
//! - [`dpp`]: value iteration for the dynamic programming principle of the
//!   game on a uniform grid.
//! - [`stats`] and [`rng`]: estimator plumbing and deterministic seeding.

pub mod bounds;
pub mod cylinder;
pub mod density;
pub mod domain;
pub mod dpp;
mod error;
pub mod game;
pub mod point;
pub mod rng;
pub mod special;
pub mod stats;
pub mod strategy;

pub use error::{Error, Result};
