//! Off-policy soft actor-critic: networks, optimizer, replay and updates.

pub mod adam;
pub mod buffer;
pub mod mlp;
pub mod sac;

pub use adam::Adam;
pub use buffer::{ReplayBuffer, Transition};
pub use mlp::MlpNetwork;
pub use sac::{Batch, SacConfig, SacState};
