//! Communication-constrained remote reinforcement learning.
//!
//! A *controller* observes rewards and learns a policy; one or more
//! reward-blind *actors* execute actions in the environment. The controller
//! steers them over a rate-limited channel. This crate implements the full
//! protocol plus baselines, at desk scale:
//!
//! - [`prng`]: counter-based deterministic randomness shared by encoder and
//!   decoder.
//! - [`dist`]: categorical / diagonal-Gaussian policy distributions with
//!   bits-based information measures.
//! - [`bits`]: MSB-first bit packing and Elias-delta integer codes.
//! - [`codec`]: remote generation via ordered random coding, plus the
//!   action- and reward-transmission baselines.
//! - [`policy`]: tiny MLP policies, deterministic Adam, and the supervised
//!   cloning update that keeps controller-side mirrors in lockstep.
//! - [`learner`]: REINFORCE with a value baseline and a minimal PPO-clip.
//! - [`envs`]: built-in deterministic environments (discrete, continuous,
//!   multi-actor).
//! - [`protocol`]: controller/actor state machines, the six communication
//!   schemes, transports, and per-step bit accounting.
//! - [`harness`]: run configuration, ledgers, sweeps, and report plots.

pub mod bits;
pub mod codec;
pub mod dist;
pub mod envs;
pub mod harness;
pub mod learner;
pub mod policy;
pub mod protocol;
pub mod prng;

pub use dist::{Action, Distribution};
pub use prng::{Purpose, StreamKey};
