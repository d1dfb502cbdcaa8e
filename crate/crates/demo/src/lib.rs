//! Browser bindings for the interactive explorer page under `www/`.
//!
//! Three operations, all returning JSON strings for a framework-free
//! canvas front end:
//!
//! - [`orc_explore`]: run many remote-generation encodes for a chosen
//!   target/proposal pair and report the decoded distribution, index
//!   histogram and bit costs against the rate bound;
//! - [`TrainerSession`]: a live training run, advanced a few epochs per
//!   animation frame, streaming per-epoch bits/KL and evaluation returns;
//! - [`quantizer_explore`]: reconstruction staircases of the reward
//!   quantizers.
//!
//! Build with `wasm-pack build crates/demo --target web` (or
//! `cargo build -p rrl-demo --target wasm32-unknown-unknown` plus the
//! `wasm-bindgen` CLI); the logic is plain Rust and unit-tested on the
//! host target, the `JsValue` conversions live only in thin wrappers.

use rrl_core::codec::{
    orc_decode, orc_encode, reward_decode, reward_encode, OrcConfig, RewardScheme,
};
use rrl_core::dist::{Categorical, Distribution};
use rrl_core::learner::Algorithm;
use rrl_core::prng::{Purpose, StreamKey};
use rrl_core::protocol::{ExperimentRunner, RunConfig, Scheme};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct OrcExploration {
    target: Vec<f64>,
    proposal: Vec<f64>,
    decoded_freq: Vec<f64>,
    index_hist: Vec<u32>,
    kl_bits: f64,
    bound_bits: f64,
    mean_ideal_bits: f64,
    mean_wire_bits: f64,
    tv_distance: f64,
}

fn orc_explore_impl(
    target: Vec<f64>,
    proposal: Vec<f64>,
    list_size: u32,
    zipf_alpha: f64,
    trials: u32,
    seed: u32,
) -> Result<String, String> {
    let p: Distribution = Categorical::new(target).map_err(|e| e.to_string())?.into();
    let q: Distribution = Categorical::new(proposal).map_err(|e| e.to_string())?.into();
    let cfg = OrcConfig::new(list_size, zipf_alpha).map_err(|e| e.to_string())?;
    let arity = match &p {
        Distribution::Categorical(c) => c.len(),
        _ => unreachable!(),
    };
    let mut counts = vec![0u32; arity];
    let mut index_hist = vec![0u32; 16];
    let mut ideal = 0.0;
    let mut wire = 0.0;
    for s in 0..trials.max(1) {
        let key = StreamKey::at(seed as u64, 0, s, 0, Purpose::Candidate);
        let (action, msg) = orc_encode(&p, &q, &cfg, key).map_err(|e| e.to_string())?;
        debug_assert_eq!(orc_decode(&msg, &q, key), action);
        counts[action.as_discrete().expect("categorical")] += 1;
        let bucket = (msg.index as usize - 1).min(index_hist.len() - 1);
        index_hist[bucket] += 1;
        ideal += msg.ideal_bits;
        wire += msg.wire_bits as f64;
    }
    let n = trials.max(1) as f64;
    let target_probs = match &p {
        Distribution::Categorical(c) => c.probs().to_vec(),
        _ => unreachable!(),
    };
    let decoded_freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let tv = 0.5
        * decoded_freq
            .iter()
            .zip(&target_probs)
            .map(|(f, p)| (f - p).abs())
            .sum::<f64>();
    let kl = p.kl(&q).map_err(|e| e.to_string())?;
    let out = OrcExploration {
        target: target_probs,
        proposal: match &q {
            Distribution::Categorical(c) => c.probs().to_vec(),
            _ => unreachable!(),
        },
        decoded_freq,
        index_hist,
        kl_bits: kl,
        bound_bits: kl + (kl + 1.0).log2() + 4.0,
        mean_ideal_bits: ideal / n,
        mean_wire_bits: wire / n,
        tv_distance: tv,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Monte Carlo view of ordered random coding for one categorical pair.
#[wasm_bindgen]
pub fn orc_explore(
    target: Vec<f64>,
    proposal: Vec<f64>,
    list_size: u32,
    zipf_alpha: f64,
    trials: u32,
    seed: u32,
) -> Result<String, JsValue> {
    orc_explore_impl(target, proposal, list_size, zipf_alpha, trials, seed)
        .map_err(|e| JsValue::from_str(&e))
}

#[derive(Serialize)]
struct EpochPoint {
    step: u32,
    mean_bits_ideal: f64,
    mean_bits_wire: f64,
    mean_kl_bits: Option<f64>,
}

#[derive(Serialize)]
struct EvalPoint {
    step: u32,
    controller_return: f64,
    clone_return: Option<f64>,
}

#[derive(Serialize)]
struct TrainerUpdate {
    steps_done: u32,
    total_steps: u32,
    finished: bool,
    epochs: Vec<EpochPoint>,
    evals: Vec<EvalPoint>,
}

/// A live training run advanced incrementally from the page.
#[wasm_bindgen]
pub struct TrainerSession {
    runner: ExperimentRunner,
    epochs_emitted: usize,
    evals_emitted: usize,
}

impl TrainerSession {
    fn create(
        env: String,
        scheme: String,
        seed: u32,
        total_steps: u32,
    ) -> Result<TrainerSession, String> {
        let scheme = Scheme::parse(&scheme).map_err(|e| e.to_string())?;
        let mut cfg = RunConfig {
            env,
            scheme,
            run_seed: seed as u64,
            total_steps: total_steps.max(2048) / 2048 * 2048,
            batch_size: 256,
            eval_interval: 2048,
            eval_episodes: 10,
            orc_zipf_alpha: 3.0,
            ..Default::default()
        };
        cfg.learner.algorithm = Algorithm::Ppo;
        if cfg.env != "gridworld" {
            cfg.learner.lr = 1e-3;
        }
        let runner = ExperimentRunner::new(&cfg).map_err(|e| e.to_string())?;
        Ok(TrainerSession {
            runner,
            epochs_emitted: 0,
            evals_emitted: 0,
        })
    }

    fn advance(&mut self, k: u32) -> Result<String, String> {
        self.runner.run_epochs(k).map_err(|e| e.to_string())?;
        let ledger = self.runner.ledger();
        let b = ledger.batch_size;
        let epochs: Vec<EpochPoint> = ledger.epoch_rows[self.epochs_emitted..]
            .iter()
            .map(|e| {
                let lo = e.step - b;
                let rows: Vec<_> = ledger
                    .bit_rows
                    .iter()
                    .filter(|r| r.step >= lo && r.step < e.step)
                    .collect();
                let n = rows.len().max(1) as f64;
                EpochPoint {
                    step: e.step,
                    mean_bits_ideal: rows.iter().map(|r| r.bits_ideal).sum::<f64>() / n,
                    mean_bits_wire: rows.iter().map(|r| r.bits_wire as f64).sum::<f64>() / n,
                    mean_kl_bits: e.mean_kl_bits,
                }
            })
            .collect();
        let evals: Vec<EvalPoint> = ledger.eval_rows[self.evals_emitted..]
            .iter()
            .map(|r| EvalPoint {
                step: r.step,
                controller_return: r.controller_return_mean,
                clone_return: r.clone_return_mean,
            })
            .collect();
        self.epochs_emitted = ledger.epoch_rows.len();
        self.evals_emitted = ledger.eval_rows.len();
        let out = TrainerUpdate {
            steps_done: self.runner.steps_done(),
            total_steps: ledger.total_steps,
            finished: self.runner.is_finished(),
            epochs,
            evals,
        };
        serde_json::to_string(&out).map_err(|e| e.to_string())
    }
}

#[wasm_bindgen]
impl TrainerSession {
    /// `env` in {gridworld, pointnav, spreadlite}; `scheme` in
    /// {grasp, asc, fr, qr16, qr8, qr4}.
    #[wasm_bindgen(constructor)]
    pub fn new(
        env: String,
        scheme: String,
        seed: u32,
        total_steps: u32,
    ) -> Result<TrainerSession, JsValue> {
        TrainerSession::create(env, scheme, seed, total_steps).map_err(|e| JsValue::from_str(&e))
    }

    /// Advance `k` epochs and return the newly produced ledger rows.
    pub fn run_epochs(&mut self, k: u32) -> Result<String, JsValue> {
        self.advance(k).map_err(|e| JsValue::from_str(&e))
    }
}

#[derive(Serialize)]
struct QuantizerCurve {
    scheme: String,
    bits: u32,
    xs: Vec<f64>,
    reconstructed: Vec<f64>,
    max_error: f64,
}

fn quantizer_explore_impl(
    scheme: String,
    r_min: f64,
    r_max: f64,
    points: u32,
) -> Result<String, String> {
    let rs = match scheme.as_str() {
        "fr" => RewardScheme::Fr,
        "qr16" => RewardScheme::Qr16,
        "qr8" => RewardScheme::Qr8,
        "qr4" => RewardScheme::Qr4,
        other => return Err(format!("unknown reward scheme '{other}'")),
    };
    if !(r_min < r_max) {
        return Err("empty range".into());
    }
    let n = points.clamp(2, 4096);
    let mut xs = Vec::with_capacity(n as usize);
    let mut ys = Vec::with_capacity(n as usize);
    let mut max_err = 0.0f64;
    for i in 0..n {
        let r = r_min + (r_max - r_min) * i as f64 / (n - 1) as f64;
        let (bytes, bits) = reward_encode(r, rs, (r_min, r_max)).map_err(|e| e.to_string())?;
        let back = reward_decode(&bytes, bits, rs, (r_min, r_max)).map_err(|e| e.to_string())?;
        max_err = max_err.max((back - r).abs());
        xs.push(r);
        ys.push(back);
    }
    let out = QuantizerCurve {
        scheme,
        bits: rs.bits(),
        xs,
        reconstructed: ys,
        max_error: max_err,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Reconstruction staircase of a reward scheme over `[r_min, r_max]`.
#[wasm_bindgen]
pub fn quantizer_explore(
    scheme: String,
    r_min: f64,
    r_max: f64,
    points: u32,
) -> Result<String, JsValue> {
    quantizer_explore_impl(scheme, r_min, r_max, points).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orc_explore_reports_consistent_json() {
        let json = orc_explore_impl(
            vec![0.7, 0.2, 0.1],
            vec![1.0 / 3.0; 3],
            256,
            1.0 + 1.0 / 256.0,
            5000,
            42,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let tv = v["tv_distance"].as_f64().unwrap();
        assert!(tv < 0.05, "tv {tv}");
        assert!(v["mean_ideal_bits"].as_f64().unwrap() <= v["bound_bits"].as_f64().unwrap());
        let freq: Vec<f64> = v["decoded_freq"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        assert!((freq.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trainer_session_streams_epochs() {
        let mut s = TrainerSession::create("gridworld".into(), "grasp".into(), 3, 2048).unwrap();
        let first = s.advance(2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&first).unwrap();
        assert_eq!(v["epochs"].as_array().unwrap().len(), 2);
        assert!(!v["finished"].as_bool().unwrap());
        // the initial evaluation is emitted with the first batch
        assert!(!v["evals"].as_array().unwrap().is_empty());
        let rest = s.advance(100).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rest).unwrap();
        assert!(v["finished"].as_bool().unwrap());
        assert_eq!(v["steps_done"].as_u64().unwrap(), 2048);
    }

    #[test]
    fn quantizer_explore_staircase() {
        let json = quantizer_explore_impl("qr4".into(), -1.0, 1.0, 256).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["bits"].as_u64().unwrap(), 4);
        // mid-rise reconstruction error stays within half a step
        assert!(v["max_error"].as_f64().unwrap() <= 2.0 / 16.0 / 2.0 + 1e-12);
        let json = quantizer_explore_impl("fr".into(), -1.0, 1.0, 64).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["max_error"].as_f64().unwrap() < 1e-7);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(orc_explore_impl(vec![], vec![0.5, 0.5], 256, 1.1, 10, 0).is_err());
        assert!(quantizer_explore_impl("qr2".into(), 0.0, 1.0, 10).is_err());
        assert!(TrainerSession::create("gridworld".into(), "smoke".into(), 0, 2048).is_err());
    }
}
