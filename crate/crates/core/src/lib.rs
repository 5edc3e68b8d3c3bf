//! Desk-scale study of reward shaping from a noisy evaluative observer:
//! a kinematic reaching environment with sparse rewards, a simulated
//! per-subject feedback decoder, a soft actor-critic learner, and the
//! experiment protocols that measure whether blended feedback accelerates
//! policy convergence.

pub mod env;
pub mod error;
pub mod feedback;
pub mod fmt;
pub mod geom;
pub mod metrics;
pub mod rl;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
