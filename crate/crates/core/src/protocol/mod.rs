//! The remote-reinforcement-learning engine.
//!
//! A controller observes states and rewards; reward-blind actors observe
//! states and execute actions. Six communication schemes connect them:
//!
//! - `grasp` — remote generation of actions against each actor's cloned
//!   policy, plus behavioral cloning on both sides to shrink the rate;
//! - `asc`  — the sampled action sent verbatim;
//! - `fr` / `qr16` / `qr8` / `qr4` — the reward sent at full or quantized
//!   precision so the actor can learn locally.
//!
//! Under `grasp` the controller maintains a bit-identical mirror of every
//! actor's clone, kept in lockstep purely by running the same
//! deterministic update on the same data; nothing about the networks ever
//! crosses the channel.
//!
//! Rewards are rounded to IEEE binary32 at the moment the controller
//! observes them: the reward channel is 32-bit end to end, which makes the
//! full-reward baseline lossless and the action-sending/reward-sending
//! learner trajectories bit-comparable.

mod core;
mod engine;
pub mod frame;
mod stream;

pub use self::core::{ActorCore, ControllerCore, OutboundMessage};
pub use self::engine::{evaluate_policies, evaluate_random, run_experiment, ExperimentRunner};
pub use self::frame::{
    any_frame_decode, control_encode, frame_decode, frame_encode, ControlKind, Frame, MessageKind,
    WireMessage, FRAME_HEADER_BYTES,
};

use crate::codec::{CodecError, OrcConfig};
use crate::dist::DistError;
use crate::envs::EnvError;
use crate::learner::{LearnerConfig, LearnerError};
use crate::policy::PolicyError;
use crate::prng::{hash64, Purpose, StreamKey};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error("missing message for actor {actor} at step {step}")]
    MissingMessage { actor: u16, step: u32 },
    #[error("unexpected message kind {kind:?} for actor {actor} under this scheme")]
    UnexpectedMessage { kind: MessageKind, actor: u16 },
    #[error("controller/actor action mismatch at step {step} actor {actor}")]
    ActionMismatch { step: u32, actor: u16 },
    #[error("lockstep mirror desync at epoch {epoch} actor {actor}")]
    LockstepMismatch { epoch: u32, actor: u16 },
    #[error("invalid run config: {0}")]
    BadConfig(String),
    #[error("transport channel closed")]
    ChannelClosed,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Communication scheme. The first two place the learner at the
/// controller; the reward schemes place it at the actor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Grasp,
    Asc,
    Fr,
    Qr16,
    Qr8,
    Qr4,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Grasp,
        Scheme::Asc,
        Scheme::Fr,
        Scheme::Qr16,
        Scheme::Qr8,
        Scheme::Qr4,
    ];

    /// GRASP and ASC learn at the controller; FR/QR at the actor.
    pub fn learner_at_controller(self) -> bool {
        matches!(self, Scheme::Grasp | Scheme::Asc)
    }

    pub fn reward_scheme(self) -> Option<crate::codec::RewardScheme> {
        match self {
            Scheme::Fr => Some(crate::codec::RewardScheme::Fr),
            Scheme::Qr16 => Some(crate::codec::RewardScheme::Qr16),
            Scheme::Qr8 => Some(crate::codec::RewardScheme::Qr8),
            Scheme::Qr4 => Some(crate::codec::RewardScheme::Qr4),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Grasp => "grasp",
            Scheme::Asc => "asc",
            Scheme::Fr => "fr",
            Scheme::Qr16 => "qr16",
            Scheme::Qr8 => "qr8",
            Scheme::Qr4 => "qr4",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme, ProtocolError> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ProtocolError::BadConfig(format!("unknown scheme '{s}'")))
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How evaluation rollouts pick actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Stochastic,
    Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    /// Synchronous calls within one thread.
    InProcess,
    /// Controller and actors on separate threads exchanging framed bytes
    /// over FIFO channels with a per-step barrier.
    Stream,
}

/// Resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub env: String,
    pub scheme: Scheme,
    pub learner: LearnerConfig,
    pub total_steps: u32,
    pub batch_size: u32,
    pub eval_interval: u32,
    pub eval_episodes: u32,
    pub run_seed: u64,
    /// Candidate list size of the remote-generation codec.
    pub orc_n: u32,
    /// Index-prior exponent for ideal-bits accounting.
    pub orc_zipf_alpha: f64,
    /// Quantizer range for the QR schemes.
    pub qr_range: (f64, f64),
    /// Behavioral-cloning learning rate and Adam steps per epoch.
    pub bc_lr: f64,
    pub bc_steps: u32,
    /// One policy (and clone) shared by all actors instead of independent
    /// per-actor parameters.
    pub shared_policy: bool,
    pub eval_mode: EvalMode,
    pub transport: Transport,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: "gridworld".into(),
            scheme: Scheme::Grasp,
            learner: LearnerConfig::default(),
            total_steps: 16_384,
            batch_size: 256,
            eval_interval: 2048,
            eval_episodes: 30,
            run_seed: 0,
            orc_n: 256,
            orc_zipf_alpha: 1.0 + 1.0 / 256.0,
            qr_range: (-1.0, 1.0),
            bc_lr: 1e-2,
            bc_steps: 20,
            shared_policy: false,
            eval_mode: EvalMode::Stochastic,
            transport: Transport::InProcess,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        crate::envs::make_env(&self.env)?;
        self.learner.validate()?;
        OrcConfig::new(self.orc_n, self.orc_zipf_alpha)?;
        if self.total_steps == 0 || self.batch_size == 0 {
            return Err(ProtocolError::BadConfig(
                "total_steps and batch_size must be positive".into(),
            ));
        }
        if self.total_steps % self.batch_size != 0 {
            return Err(ProtocolError::BadConfig(format!(
                "total_steps {} must be a multiple of batch_size {}",
                self.total_steps, self.batch_size
            )));
        }
        if self.eval_interval == 0 || self.eval_interval % self.batch_size != 0 {
            return Err(ProtocolError::BadConfig(format!(
                "eval_interval {} must be a positive multiple of batch_size {}",
                self.eval_interval, self.batch_size
            )));
        }
        if self.total_steps % self.eval_interval != 0 {
            return Err(ProtocolError::BadConfig(format!(
                "total_steps {} must be a multiple of eval_interval {}",
                self.total_steps, self.eval_interval
            )));
        }
        if self.eval_episodes == 0 {
            return Err(ProtocolError::BadConfig("eval_episodes must be positive".into()));
        }
        if matches!(self.scheme, Scheme::Qr8 | Scheme::Qr4) && !(self.qr_range.0 < self.qr_range.1)
        {
            return Err(ProtocolError::BadConfig(format!(
                "qr_range [{}, {}] invalid",
                self.qr_range.0, self.qr_range.1
            )));
        }
        if self.bc_steps == 0 || self.bc_lr <= 0.0 {
            return Err(ProtocolError::BadConfig(
                "bc_steps and bc_lr must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn orc_config(&self) -> OrcConfig {
        OrcConfig::new(self.orc_n, self.orc_zipf_alpha).expect("validated")
    }
}

/// (episode, step-within-episode) coordinate of the deterministic key
/// schedule, shared by controller and actors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepCoords {
    pub episode: u32,
    pub step_in_episode: u32,
    /// Global step index (accounting only, not part of any key).
    pub global_step: u32,
}

impl StepCoords {
    pub fn key(&self, run_seed: u64, actor_id: u16, purpose: Purpose) -> StreamKey {
        StreamKey::at(run_seed, self.episode, self.step_in_episode, actor_id, purpose)
    }
}

/// Episode-id spaces. Training episodes count from zero; evaluation and
/// random-baseline rollouts live in disjoint high ranges so they never
/// collide with the training key schedule.
pub const EVAL_EPISODE_BASE: u32 = 0x8000_0000;
pub const RANDOM_EPISODE_BASE: u32 = 0xC000_0000;

/// Deterministic seed for a parameter set. `entity` tags the actor (or 0
/// for shared/single), `role` separates policy (0) from value (1)
/// networks. Controller policies, controller mirrors and actor clones for
/// the same entity share a seed, which is what makes them identical at
/// initialization.
pub fn param_seed(run_seed: u64, entity: u16, role: u32) -> u64 {
    hash64(StreamKey {
        run_seed,
        episode: role,
        step: 0,
        actor_id: entity,
        purpose: Purpose::ParamInit,
        counter: 0,
    })
}

// ── Ledger ──────────────────────────────────────────────────────

/// Per-(step, actor) communication cost.
#[derive(Debug, Clone, PartialEq)]
pub struct BitRow {
    pub step: u32,
    pub actor: u16,
    pub bits_ideal: f64,
    pub bits_wire: u32,
}

/// Per-evaluation returns (controller/learner policy, and the clone where
/// the scheme has one).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub step: u32,
    pub controller_return_mean: f64,
    pub controller_return_std: f64,
    pub clone_return_mean: Option<f64>,
    pub clone_return_std: Option<f64>,
}

/// Per-epoch diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    /// Global step at the epoch boundary (exclusive end).
    pub step: u32,
    /// Mean controller/clone divergence over the epoch, in bits (schemes
    /// with a clone only).
    pub mean_kl_bits: Option<f64>,
    /// Mirror digest equality (GRASP only).
    pub digest_match: Option<bool>,
}

/// Complete record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLedger {
    pub env: String,
    pub scheme: Scheme,
    pub run_seed: u64,
    pub total_steps: u32,
    pub batch_size: u32,
    pub num_actors: usize,
    pub bit_rows: Vec<BitRow>,
    pub eval_rows: Vec<EvalRow>,
    pub epoch_rows: Vec<EpochRow>,
    /// Frame-header bytes (as bits) sent alongside accounted payloads.
    pub header_overhead_bits: u64,
    /// Protocol messages sent, indexed by `MessageKind as usize`.
    pub msg_counts: [u64; 4],
}

impl RunLedger {
    /// Ideal bits charged to one actor's channel.
    pub fn actor_ideal_bits(&self, actor: u16) -> f64 {
        self.bit_rows
            .iter()
            .filter(|r| r.actor == actor)
            .map(|r| r.bits_ideal)
            .sum()
    }

    /// Total ideal bits, defined as the sum of the per-actor channel
    /// totals (so the per-actor ledgers add up to it exactly).
    pub fn total_ideal_bits(&self) -> f64 {
        (0..self.num_actors as u16)
            .map(|i| self.actor_ideal_bits(i))
            .sum()
    }

    pub fn total_wire_bits(&self) -> u64 {
        self.bit_rows.iter().map(|r| r.bits_wire as u64).sum()
    }

    /// Mean ideal bits per (step, actor) row over an inclusive global-step
    /// window.
    pub fn mean_ideal_bits_in(&self, from_step: u32, to_step: u32) -> f64 {
        let rows: Vec<&BitRow> = self
            .bit_rows
            .iter()
            .filter(|r| r.step >= from_step && r.step <= to_step)
            .collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|r| r.bits_ideal).sum::<f64>() / rows.len() as f64
    }

    pub fn final_eval(&self) -> Option<&EvalRow> {
        self.eval_rows.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_round_trip_names() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.name()).unwrap(), s);
        }
        assert!(Scheme::parse("carrier-pigeon").is_err());
    }

    #[test]
    fn config_validation_catches_misalignment() {
        let mut cfg = RunConfig::default();
        cfg.total_steps = 1000;
        cfg.batch_size = 256;
        assert!(cfg.validate().is_err());
        cfg.total_steps = 1024;
        cfg.eval_interval = 512;
        assert!(cfg.validate().is_ok());
        cfg.eval_interval = 300;
        assert!(cfg.validate().is_err());
        cfg = RunConfig::default();
        cfg.env = "atari".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn param_seed_separates_entities_and_roles() {
        let s = 42;
        assert_ne!(param_seed(s, 0, 0), param_seed(s, 1, 0));
        assert_ne!(param_seed(s, 0, 0), param_seed(s, 0, 1));
        assert_eq!(param_seed(s, 2, 1), param_seed(s, 2, 1));
    }
}
