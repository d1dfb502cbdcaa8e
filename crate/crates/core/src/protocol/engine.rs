//! Transport-agnostic experiment loop.
//!
//! The engine owns the environment and the controller core, talks to
//! actors through the [`ActorEndpoint`] trait (direct calls in-process,
//! framed bytes over channels for the stream transport), rounds every
//! observed reward to binary32, does the per-step bit accounting and the
//! epoch-boundary lockstep checks, and runs the frozen-parameter
//! evaluation rollouts.

use super::core::{policy_arch, ActorCore, ControllerCore, OutboundMessage};
use super::frame::FRAME_HEADER_BYTES;
use super::{
    BitRow, EpochRow, EvalMode, EvalRow, MessageKind, ProtocolError, RunConfig, RunLedger, Scheme,
    StepCoords, Transport, WireMessage, EVAL_EPISODE_BASE, RANDOM_EPISODE_BASE,
};
use crate::dist::{Action, Categorical, Distribution};
use crate::envs::{make_env, EnvSpec, Environment};
use crate::policy::{forward, init_params, param_digest, PolicyParams};
use crate::prng::{uniform64, Purpose, StreamKey};

/// One physical actor process as seen by the engine. A single endpoint
/// may serve several actor ids when policies are shared.
pub(crate) trait ActorEndpoint {
    fn ids(&self) -> Vec<u16>;
    /// Deliver one step: previous-step episode flag, per-id observations
    /// and this step's messages; returns the executed actions in id order.
    fn step(
        &mut self,
        coords: StepCoords,
        prev_done: Option<bool>,
        obs: &[Vec<f64>],
        msgs: &[WireMessage],
    ) -> Result<Vec<Action>, ProtocolError>;
    /// Close the epoch: flush messages, bootstrap observation, and run the
    /// actor-side update. Returns the actor's updated policy snapshot.
    fn epoch(
        &mut self,
        flush: &[WireMessage],
        next_obs: &[Vec<f64>],
        next_done: bool,
        progress: f64,
    ) -> Result<PolicyParams, ProtocolError>;
    fn shutdown(&mut self) -> Result<(), ProtocolError>;
}

struct InProcessEndpoint {
    core: ActorCore,
}

impl ActorEndpoint for InProcessEndpoint {
    fn ids(&self) -> Vec<u16> {
        self.core.ids().to_vec()
    }

    fn step(
        &mut self,
        coords: StepCoords,
        prev_done: Option<bool>,
        obs: &[Vec<f64>],
        msgs: &[WireMessage],
    ) -> Result<Vec<Action>, ProtocolError> {
        if let Some(done) = prev_done {
            self.core.note_prev_done(done);
        }
        let ids = self.core.ids().to_vec();
        let mut actions = Vec::with_capacity(ids.len());
        for (k, &id) in ids.iter().enumerate() {
            let msg = msgs.iter().find(|m| m.actor_id == id);
            actions.push(self.core.act(coords, id, &obs[k], msg)?);
        }
        Ok(actions)
    }

    fn epoch(
        &mut self,
        flush: &[WireMessage],
        next_obs: &[Vec<f64>],
        next_done: bool,
        progress: f64,
    ) -> Result<PolicyParams, ProtocolError> {
        for msg in flush {
            self.core.deliver(msg)?;
        }
        self.core.epoch_update(next_obs, next_done, progress)
    }

    fn shutdown(&mut self) -> Result<(), ProtocolError> {
        Ok(())
    }
}

/// Actor-id groups: one singleton group per actor, or one group of all
/// actors when policies are shared.
pub(crate) fn actor_groups(cfg: &RunConfig, num_actors: usize) -> Vec<Vec<u16>> {
    if cfg.shared_policy {
        vec![(0..num_actors as u16).collect()]
    } else {
        (0..num_actors as u16).map(|i| vec![i]).collect()
    }
}

/// The initial policy every actor starts from (clone for the
/// action-sending schemes, local learner policy otherwise). Shared with
/// the engine's instrumentation snapshots.
fn initial_actor_policy(cfg: &RunConfig, spec: &EnvSpec, actor: u16) -> PolicyParams {
    let entity = if cfg.shared_policy { 0 } else { actor };
    init_params(super::param_seed(cfg.run_seed, entity, 0), &policy_arch(spec))
}

/// Run one experiment to completion.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunLedger, ProtocolError> {
    cfg.validate()?;
    if cfg.shared_policy && !cfg.scheme.learner_at_controller() {
        return Err(ProtocolError::BadConfig(
            "shared_policy applies to the action-sending schemes".into(),
        ));
    }
    match cfg.transport {
        Transport::InProcess => {
            let spec = make_env(&cfg.env)?.spec().clone();
            let mut endpoints: Vec<Box<dyn ActorEndpoint>> = Vec::new();
            for ids in actor_groups(cfg, spec.num_actors) {
                endpoints.push(Box::new(InProcessEndpoint {
                    core: ActorCore::new(cfg, &spec, ids)?,
                }));
            }
            run_with_endpoints(cfg, endpoints)
        }
        Transport::Stream => super::stream::run_stream(cfg),
    }
}

pub(crate) fn run_with_endpoints(
    cfg: &RunConfig,
    endpoints: Vec<Box<dyn ActorEndpoint>>,
) -> Result<RunLedger, ProtocolError> {
    let mut runner = ExperimentRunner::with_endpoints(cfg, endpoints)?;
    runner.run_to_end()?;
    Ok(runner.into_ledger())
}

/// Incrementally steppable experiment: the same loop as
/// [`run_experiment`], driveable a few epochs at a time (used by
/// interactive front ends).
pub struct ExperimentRunner {
    cfg: RunConfig,
    env: Box<dyn crate::envs::Environment>,
    ctrl: ControllerCore,
    endpoints: Vec<Box<dyn ActorEndpoint>>,
    actor_policy_snapshots: Vec<PolicyParams>,
    head_map: Vec<usize>,
    ledger: RunLedger,
    t: u32,
    episode: u32,
    step_in_episode: u32,
    obs: Vec<Vec<f64>>,
    prev_done: Option<bool>,
    eval_block: u32,
    kl_sum: f64,
    kl_count: usize,
}

impl ExperimentRunner {
    pub fn new(cfg: &RunConfig) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        let spec = make_env(&cfg.env)?.spec().clone();
        let mut endpoints: Vec<Box<dyn ActorEndpoint>> = Vec::new();
        for ids in actor_groups(cfg, spec.num_actors) {
            endpoints.push(Box::new(InProcessEndpoint {
                core: ActorCore::new(cfg, &spec, ids)?,
            }));
        }
        Self::with_endpoints(cfg, endpoints)
    }

    pub(crate) fn with_endpoints(
        cfg: &RunConfig,
        endpoints: Vec<Box<dyn ActorEndpoint>>,
    ) -> Result<Self, ProtocolError> {
        let mut env = make_env(&cfg.env)?;
        let spec = env.spec().clone();
        let n_actors = spec.num_actors;
        let ctrl = ControllerCore::new(cfg, &spec)?;
        let actor_policy_snapshots: Vec<PolicyParams> = (0..n_actors)
            .map(|i| initial_actor_policy(cfg, &spec, i as u16))
            .collect();
        let head_map: Vec<usize> = if cfg.shared_policy {
            vec![0; n_actors]
        } else {
            (0..n_actors).collect()
        };
        let mut ledger = RunLedger {
            env: cfg.env.clone(),
            scheme: cfg.scheme,
            run_seed: cfg.run_seed,
            total_steps: cfg.total_steps,
            batch_size: cfg.batch_size,
            num_actors: n_actors,
            bit_rows: Vec::new(),
            eval_rows: Vec::new(),
            epoch_rows: Vec::new(),
            header_overhead_bits: 0,
            msg_counts: [0; 4],
        };
        let obs = env.reset(reset_key(cfg.run_seed, 0));
        record_eval(cfg, &mut ledger, 0, 0, &ctrl, &actor_policy_snapshots)?;
        Ok(ExperimentRunner {
            cfg: cfg.clone(),
            env,
            ctrl,
            endpoints,
            actor_policy_snapshots,
            head_map,
            ledger,
            t: 0,
            episode: 0,
            step_in_episode: 0,
            obs,
            prev_done: None,
            eval_block: 0,
            kl_sum: 0.0,
            kl_count: 0,
        })
    }

    pub fn ledger(&self) -> &RunLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> RunLedger {
        self.ledger
    }

    pub fn steps_done(&self) -> u32 {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.cfg.total_steps
    }

    /// Advance `k` epochs (or to the end of the run, whichever is first).
    pub fn run_epochs(&mut self, k: u32) -> Result<(), ProtocolError> {
        let target = (self.t + k * self.cfg.batch_size).min(self.cfg.total_steps);
        while self.t < target {
            self.step_once()?;
        }
        if self.is_finished() {
            for ep in self.endpoints.iter_mut() {
                ep.shutdown()?;
            }
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<(), ProtocolError> {
        let epochs = self.cfg.total_steps / self.cfg.batch_size;
        self.run_epochs(epochs)
    }

    fn step_once(&mut self) -> Result<(), ProtocolError> {
        let cfg = &self.cfg;
        let n_actors = self.ledger.num_actors;
        let t = self.t;
        let coords = StepCoords {
            episode: self.episode,
            step_in_episode: self.step_in_episode,
            global_step: t,
        };
        let global_obs = self.env.global_obs();
        let outbound = self.ctrl.begin_step(coords, &self.obs, &global_obs)?;
        account(&mut self.ledger, &outbound);

        let mut executed: Vec<Option<Action>> = vec![None; n_actors];
        for ep in self.endpoints.iter_mut() {
            let ids = ep.ids();
            let ep_obs: Vec<Vec<f64>> =
                ids.iter().map(|&id| self.obs[id as usize].clone()).collect();
            let ep_msgs: Vec<WireMessage> = outbound
                .iter()
                .filter(|m| ids.contains(&m.wire.actor_id))
                .map(|m| m.wire.clone())
                .collect();
            let actions = ep.step(coords, self.prev_done, &ep_obs, &ep_msgs)?;
            for (&id, a) in ids.iter().zip(actions) {
                executed[id as usize] = Some(a);
            }
        }
        let executed: Vec<Action> = executed
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                a.ok_or(ProtocolError::MissingMessage {
                    actor: i as u16,
                    step: t,
                })
            })
            .collect::<Result<_, _>>()?;

        // action fidelity: the controller learns from actions it chose but
        // never directly observes; they must match what actors executed
        if cfg.scheme.learner_at_controller() {
            for (i, (rec, exe)) in self.ctrl.recorded_actions().iter().zip(&executed).enumerate()
            {
                if rec != exe {
                    return Err(ProtocolError::ActionMismatch {
                        step: t,
                        actor: i as u16,
                    });
                }
            }
            // controller/clone divergence, against the epoch-constant
            // actor policy
            for i in 0..n_actors {
                let p = forward(self.ctrl.policy_head(i).expect("learner"), &self.obs[i])?;
                let q = forward(&self.actor_policy_snapshots[i], &self.obs[i])?;
                self.kl_sum += p.kl(&q)?;
                self.kl_count += 1;
            }
        }

        let out = self.env.step(&executed)?;
        // the reward channel is binary32 end to end
        let reward = out.reward as f32 as f64;
        let done = out.done;
        let next_global = self.env.global_obs();
        self.ctrl.observe_reward(reward, done, &next_global, done);
        self.prev_done = Some(done);

        if done {
            self.episode += 1;
            self.step_in_episode = 0;
            self.obs = self.env.reset(reset_key(cfg.run_seed, self.episode));
        } else {
            self.obs = out.obs;
            self.step_in_episode += 1;
        }

        if (t + 1) % cfg.batch_size == 0 {
            let progress = (t + 1) as f64 / cfg.total_steps as f64;
            let flush = self.ctrl.epoch_flush(t)?;
            account(&mut self.ledger, &flush);
            let next_done = self.prev_done.unwrap_or(false);

            let mut new_snapshots: Vec<Option<PolicyParams>> = vec![None; n_actors];
            for ep in self.endpoints.iter_mut() {
                let ids = ep.ids();
                let ep_flush: Vec<WireMessage> = flush
                    .iter()
                    .filter(|m| ids.contains(&m.wire.actor_id))
                    .map(|m| m.wire.clone())
                    .collect();
                let ep_next: Vec<Vec<f64>> =
                    ids.iter().map(|&id| self.obs[id as usize].clone()).collect();
                let snapshot = ep.epoch(&ep_flush, &ep_next, next_done, progress)?;
                for &id in &ids {
                    new_snapshots[id as usize] = Some(snapshot.clone());
                }
            }
            let digests = self.ctrl.epoch_update(progress)?;

            let mut digest_match = None;
            if cfg.scheme == Scheme::Grasp {
                let epoch_idx = (t + 1) / cfg.batch_size - 1;
                let mut all_match = true;
                for i in 0..n_actors {
                    let actor_digest = param_digest(new_snapshots[i].as_ref().expect("snapshot"));
                    if actor_digest != digests[self.head_map[i]] {
                        all_match = false;
                    }
                }
                digest_match = Some(all_match);
                if !all_match {
                    return Err(ProtocolError::LockstepMismatch {
                        epoch: epoch_idx,
                        actor: 0,
                    });
                }
            }
            for (i, s) in new_snapshots.into_iter().enumerate() {
                self.actor_policy_snapshots[i] = s.expect("snapshot");
            }

            let mean_kl = if cfg.scheme.learner_at_controller() && self.kl_count > 0 {
                Some(self.kl_sum / self.kl_count as f64)
            } else {
                None
            };
            self.ledger.epoch_rows.push(EpochRow {
                step: t + 1,
                mean_kl_bits: mean_kl,
                digest_match,
            });
            self.kl_sum = 0.0;
            self.kl_count = 0;
            self.prev_done = None;
        }

        if (t + 1) % cfg.eval_interval == 0 {
            self.eval_block += 1;
            record_eval(
                cfg,
                &mut self.ledger,
                t + 1,
                self.eval_block,
                &self.ctrl,
                &self.actor_policy_snapshots,
            )?;
        }
        self.t += 1;
        Ok(())
    }
}

fn reset_key(run_seed: u64, episode: u32) -> StreamKey {
    StreamKey::at(run_seed, episode, 0, 0, Purpose::EnvNoise)
}

fn account(ledger: &mut RunLedger, msgs: &[OutboundMessage]) {
    for m in msgs {
        ledger.msg_counts[m.wire.kind as usize] += 1;
        ledger.header_overhead_bits += (FRAME_HEADER_BYTES * 8) as u64;
        if m.wire.kind != MessageKind::EpochMark {
            ledger.bit_rows.push(BitRow {
                step: m.wire.step,
                actor: m.wire.actor_id,
                bits_ideal: m.ideal_bits,
                bits_wire: m.wire.payload_bits as u32,
            });
        }
    }
}

fn record_eval(
    cfg: &RunConfig,
    ledger: &mut RunLedger,
    step: u32,
    eval_block: u32,
    ctrl: &ControllerCore,
    actor_snapshots: &[PolicyParams],
) -> Result<(), ProtocolError> {
    let (learner_policies, clone_policies): (Vec<PolicyParams>, Option<Vec<PolicyParams>>) =
        if cfg.scheme.learner_at_controller() {
            (
                ctrl.learner_policies().expect("learner"),
                Some(actor_snapshots.to_vec()),
            )
        } else {
            (actor_snapshots.to_vec(), None)
        };

    let (c_mean, c_std) = evaluate_policies(
        &cfg.env,
        &learner_policies,
        cfg.run_seed,
        eval_block,
        cfg.eval_episodes,
        cfg.eval_mode,
    )?;
    let mut row = EvalRow {
        step,
        controller_return_mean: c_mean,
        controller_return_std: c_std,
        clone_return_mean: None,
        clone_return_std: None,
    };
    if let Some(clones) = clone_policies {
        let (m, s) = evaluate_policies(
            &cfg.env,
            &clones,
            cfg.run_seed,
            eval_block,
            cfg.eval_episodes,
            cfg.eval_mode,
        )?;
        row.clone_return_mean = Some(m);
        row.clone_return_std = Some(s);
    }
    ledger.eval_rows.push(row);
    Ok(())
}

/// Frozen-parameter evaluation: `episodes` rollouts with per-actor
/// policies, in a dedicated episode-id space so the training key schedule
/// is untouched. Returns (mean, std) of the episode returns (rewards
/// binary32-rounded like training).
pub fn evaluate_policies(
    env_name: &str,
    policies: &[PolicyParams],
    run_seed: u64,
    eval_block: u32,
    episodes: u32,
    mode: EvalMode,
) -> Result<(f64, f64), ProtocolError> {
    let mut env = make_env(env_name)?;
    let n = env.spec().num_actors;
    assert_eq!(policies.len(), n, "one policy per actor");
    let mut returns = Vec::with_capacity(episodes as usize);
    for e in 0..episodes {
        let ep_id = EVAL_EPISODE_BASE | (eval_block * 4096 + e);
        returns.push(rollout(&mut *env, ep_id, run_seed, |obs, i, key| {
            let d = forward(&policies[i], obs)?;
            Ok(match mode {
                EvalMode::Stochastic => d.sample(key),
                EvalMode::Mode => d.mode(),
            })
        })?);
    }
    Ok(mean_std(&returns))
}

/// Uniform-random-policy baseline over the same episode structure, in its
/// own episode-id space.
pub fn evaluate_random(
    env_name: &str,
    run_seed: u64,
    episodes: u32,
) -> Result<(f64, f64), ProtocolError> {
    let mut env = make_env(env_name)?;
    let space = env.spec().action_space.clone();
    let mut returns = Vec::with_capacity(episodes as usize);
    for e in 0..episodes {
        let ep_id = RANDOM_EPISODE_BASE | e;
        returns.push(rollout(&mut *env, ep_id, run_seed, |_, _, key| {
            Ok(match &space {
                crate::codec::ActionSpace::Discrete(k) => {
                    let d: Distribution = Categorical::uniform(*k).into();
                    d.sample(key)
                }
                crate::codec::ActionSpace::Continuous { dim } => Action::Continuous(
                    (0..*dim)
                        .map(|k| 2.0 * uniform64(key.with_counter(k as u64 + 1)) - 1.0)
                        .collect(),
                ),
            })
        })?);
    }
    Ok(mean_std(&returns))
}

fn rollout(
    env: &mut dyn Environment,
    ep_id: u32,
    run_seed: u64,
    mut act: impl FnMut(&[f64], usize, StreamKey) -> Result<Action, ProtocolError>,
) -> Result<f64, ProtocolError> {
    let n = env.spec().num_actors;
    let mut obs = env.reset(StreamKey::at(run_seed, ep_id, 0, 0, Purpose::EnvNoise));
    let mut ret = 0.0;
    let mut step: u32 = 0;
    loop {
        let mut actions = Vec::with_capacity(n);
        for (i, ob) in obs.iter().enumerate() {
            let key = StreamKey::at(run_seed, ep_id, step, i as u16, Purpose::ActionSample);
            actions.push(act(ob, i, key)?);
        }
        let out = env.step(&actions)?;
        ret += out.reward as f32 as f64;
        step += 1;
        if out.done {
            return Ok(ret);
        }
        obs = out.obs;
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
