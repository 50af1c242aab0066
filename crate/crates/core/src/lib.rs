//! Human-to-humanoid motion toolkit: retargeting, a reduced-order humanoid
//! simulator, PPO training of a pose-conditioned shadowing transformer and
//! chunked imitation learning with a forward-dynamics feature loss.

pub mod cli;
pub(crate) mod codec;
pub mod dataset;
pub mod error;
pub mod learn;
pub mod model;
pub mod motion;
pub mod pipeline;
pub mod retarget;
pub mod synth;
pub mod rotation;
pub mod simenv;

pub use error::{Error, Result};
