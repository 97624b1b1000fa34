//! Cross apprenticeship learning over finite Markov decision processes.
//!
//! The crate is organised bottom-up:
//!
//! * [`mdp`] holds environments, policies and the exact policy/occupation
//!   measure correspondence, together with Monte Carlo rollouts.
//! * [`lp`] is a small linear-programming layer (problem builder, L1
//!   epigraph transform, two solver backends).
//! * [`apprenticeship`] implements cost bases, the worst-case discrepancy and
//!   the single-environment apprenticeship LP.
//! * [`cal`] builds the McCormick outer relaxation and the inner ball
//!   approximation of the cross-learning problem and turns their solutions
//!   back into feasible policies.
//! * [`gridworld`] generates windy gridworlds, trains SARSA experts and
//!   scores policies by goal-reaching success.
//! * [`harness`] wires everything into a reproducible experiment with JSON
//!   configuration and reports.

pub mod apprenticeship;
pub mod cal;
mod error;
pub mod gridworld;
pub mod harness;
pub mod io;
pub mod lp;
pub mod mdp;
pub mod seeds;

pub use error::{Error, Result};
