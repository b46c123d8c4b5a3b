//! Inverse reinforcement learning of a cognitive radar's tracking-driven
//! action policy.
//!
//! A target moves under a constant-velocity model and is tracked by a
//! radar whose action at each revisit is drawn from a policy that depends
//! on the tracker's predicted covariance. An observer who sees the target
//! state and the radar's action, but not its measurements, learns that
//! policy with a particle filter whose particles each carry a kernel-smoothed
//! Dirichlet-process posterior over actions. An active learner can also steer
//! the target so that the radar's belief lands where the policy estimate is
//! least certain.
//!
//! Modules, bottom-up:
//!
//! - [`forward`]: target motion, radar tracker and the true policy.
//! - [`ddp`]: the dependent Dirichlet-process policy posterior.
//! - [`inverse`]: the particle filter over radar beliefs and policies.
//! - [`active`]: acquisition scores, maneuver planning and the probing loop.
//! - [`metrics`]: MSE, KL and rank accuracy on held-out features.
//! - [`harness`]: seeded runs, sweeps and CSV / JSON-lines export.

pub mod active;
pub mod config;
pub mod ddp;
pub mod error;
pub mod forward;
pub mod harness;
pub mod inverse;
pub mod metrics;
pub mod rng;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use rng::{Purpose, Streams};
