//! Replay-bootstrapped training for a toy in-hand reorientation task.
//!
//! The crate bundles everything one autonomous training run needs:
//!
//! - [`nn`]: a minimal dense-network engine with reverse-mode gradients for
//!   parameters *and* inputs, Adam, and Polyak averaging.
//! - [`replay`]: per-task transition buffers, the 50/50 prior/online batch
//!   composition, and a versioned on-disk codec.
//! - [`rewards`]: adversarial goal classifiers (mixup, label smoothing,
//!   gradient penalty) whose log-probability is the reward signal.
//! - [`agent`]: a SAC-style actor-critic with a REDQ critic ensemble and a
//!   configurable update-to-data ratio, trained on mixed batches.
//! - [`env`]: the deterministic toy hand simulator, scripted pickup expert,
//!   goal-example generator, and ground-truth success evaluator.
//! - [`bc`]: behavior-cloned reset (pickup) policies and reset execution
//!   with the 80/20 dual-policy selection rule.
//! - [`experiment`]: the end-to-end training loop, evaluation schedule,
//!   comparison suites, and curve emission.

pub mod agent;
pub mod bc;
pub mod codec;
pub mod env;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod replay;
pub mod rewards;

pub use error::{Error, Result};
