//! Flat TOML run configuration.
//!
//! One file per run, flat keys with explicit units, diff-able provenance
//! for every figure. Unknown keys are rejected; `env` and `scheme` are
//! required, everything else has a default.

use crate::learner::{Algorithm, LearnerConfig};
use crate::protocol::{EvalMode, RunConfig, Scheme, Transport};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Invalid(#[from] crate::protocol::ProtocolError),
}

/// On-disk schema. Field names are the config-file keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub env: String,
    pub scheme: Scheme,
    #[serde(default = "d_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "d_total_steps")]
    pub total_steps: u32,
    #[serde(default = "d_batch_size")]
    pub batch_size: u32,
    #[serde(default = "d_eval_interval")]
    pub eval_interval: u32,
    #[serde(default = "d_eval_episodes")]
    pub eval_episodes: u32,
    #[serde(default)]
    pub run_seed: u64,
    #[serde(default = "d_orc_n")]
    pub orc_n: u32,
    /// Defaults to 1 + 1/orc_n when absent.
    #[serde(default)]
    pub orc_zipf_alpha: Option<f64>,
    #[serde(default = "d_qr_min")]
    pub qr_min: f64,
    #[serde(default = "d_qr_max")]
    pub qr_max: f64,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_gae_lambda")]
    pub gae_lambda: f64,
    #[serde(default = "d_clip_coef")]
    pub clip_coef: f64,
    #[serde(default = "d_update_epochs")]
    pub update_epochs: usize,
    #[serde(default = "d_ent_coef")]
    pub ent_coef: f64,
    #[serde(default = "d_vf_coef")]
    pub vf_coef: f64,
    #[serde(default = "d_num_minibatches")]
    pub num_minibatches: usize,
    #[serde(default)]
    pub anneal_lr: bool,
    #[serde(default = "d_bc_lr")]
    pub bc_lr: f64,
    #[serde(default = "d_bc_steps")]
    pub bc_steps: u32,
    #[serde(default)]
    pub shared_policy: bool,
    #[serde(default = "d_eval_mode")]
    pub eval_mode: EvalMode,
    #[serde(default = "d_transport")]
    pub transport: Transport,
    #[serde(default = "d_output_dir")]
    pub output_dir: PathBuf,
}

fn d_algorithm() -> Algorithm {
    Algorithm::Ppo
}
fn d_total_steps() -> u32 {
    16_384
}
fn d_batch_size() -> u32 {
    256
}
fn d_eval_interval() -> u32 {
    2048
}
fn d_eval_episodes() -> u32 {
    30
}
fn d_orc_n() -> u32 {
    256
}
fn d_qr_min() -> f64 {
    -1.0
}
fn d_qr_max() -> f64 {
    1.0
}
fn d_lr() -> f64 {
    2.5e-3
}
fn d_gamma() -> f64 {
    0.99
}
fn d_gae_lambda() -> f64 {
    0.95
}
fn d_clip_coef() -> f64 {
    0.2
}
fn d_update_epochs() -> usize {
    4
}
fn d_ent_coef() -> f64 {
    0.01
}
fn d_vf_coef() -> f64 {
    0.5
}
fn d_num_minibatches() -> usize {
    4
}
fn d_bc_lr() -> f64 {
    1e-2
}
fn d_bc_steps() -> u32 {
    20
}
fn d_eval_mode() -> EvalMode {
    EvalMode::Stochastic
}
fn d_transport() -> Transport {
    Transport::InProcess
}
fn d_output_dir() -> PathBuf {
    PathBuf::from("runs/out")
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<FileConfig, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        FileConfig::parse(&text)
    }

    /// Resolve into the engine configuration (validated) plus the output
    /// directory.
    pub fn resolve(&self) -> Result<(RunConfig, PathBuf), ConfigError> {
        let cfg = RunConfig {
            env: self.env.clone(),
            scheme: self.scheme,
            learner: LearnerConfig {
                algorithm: self.algorithm,
                lr: self.lr,
                gamma: self.gamma,
                gae_lambda: self.gae_lambda,
                clip_coef: self.clip_coef,
                update_epochs: self.update_epochs,
                ent_coef: self.ent_coef,
                vf_coef: self.vf_coef,
                num_minibatches: self.num_minibatches,
                anneal_lr: self.anneal_lr,
            },
            total_steps: self.total_steps,
            batch_size: self.batch_size,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
            run_seed: self.run_seed,
            orc_n: self.orc_n,
            orc_zipf_alpha: self
                .orc_zipf_alpha
                .unwrap_or(1.0 + 1.0 / self.orc_n as f64),
            qr_range: (self.qr_min, self.qr_max),
            bc_lr: self.bc_lr,
            bc_steps: self.bc_steps,
            shared_policy: self.shared_policy,
            eval_mode: self.eval_mode,
            transport: self.transport,
        };
        cfg.validate()?;
        Ok((cfg, self.output_dir.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let fc = FileConfig::parse("env = \"gridworld\"\nscheme = \"grasp\"\n").unwrap();
        let (cfg, out) = fc.resolve().unwrap();
        assert_eq!(cfg.env, "gridworld");
        assert_eq!(cfg.scheme, Scheme::Grasp);
        assert_eq!(cfg.orc_n, 256);
        assert!((cfg.orc_zipf_alpha - (1.0 + 1.0 / 256.0)).abs() < 1e-12);
        assert_eq!(out, PathBuf::from("runs/out"));
    }

    #[test]
    fn missing_env_names_the_field() {
        let err = FileConfig::parse("scheme = \"fr\"\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("env"), "message should name the field: {msg}");
    }

    #[test]
    fn unknown_key_rejected_with_location() {
        let err = FileConfig::parse(
            "env = \"gridworld\"\nscheme = \"grasp\"\nbanana_count = 7\n",
        )
        .unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("banana_count"), "{msg}");
    }

    #[test]
    fn bad_alignment_rejected_at_resolve() {
        let fc = FileConfig::parse(
            "env = \"gridworld\"\nscheme = \"grasp\"\ntotal_steps = 100\nbatch_size = 64\n",
        )
        .unwrap();
        assert!(fc.resolve().is_err());
    }

    #[test]
    fn alpha_defaults_track_list_size() {
        let fc =
            FileConfig::parse("env = \"gridworld\"\nscheme = \"grasp\"\norc_n = 64\n").unwrap();
        let (cfg, _) = fc.resolve().unwrap();
        assert!((cfg.orc_zipf_alpha - (1.0 + 1.0 / 64.0)).abs() < 1e-12);
    }
}
