//! Controller and actor state machines, transport-agnostic.
//!
//! A [`ControllerCore`] owns the learner (for the action-sending schemes)
//! and the per-actor mirrors; an [`ActorCore`] owns the clone (or, for the
//! reward-sending schemes, its own local learner). Both sides advance on
//! explicit calls from an engine loop, so the in-process and byte-stream
//! transports exercise the exact same logic.

use super::{
    MessageKind, ProtocolError, RunConfig, Scheme, StepCoords, WireMessage,
};
use crate::codec::{
    asc_bits, asc_decode, asc_encode, index_wire_encode, orc_decode, orc_encode, reward_decode,
    reward_encode, ActionSpace, EncodedMessage, OrcConfig, RewardScheme,
};
use crate::dist::Action;
use crate::envs::EnvSpec;
use crate::learner::{Learner, Trajectory};
use crate::policy::{
    bc_update, forward, init_params, AdamState, Arch, BcBatch, HeadKind, PolicyParams,
};
use crate::prng::{Purpose, StreamKey};

/// A wire message plus its ideal-bits accounting (the prior cost of an
/// index, or the payload width for the fixed-length baselines).
#[derive(Debug, Clone, PartialEq)]
pub struct OutboundMessage {
    pub wire: WireMessage,
    pub ideal_bits: f64,
}

pub(crate) fn policy_arch(spec: &EnvSpec) -> Arch {
    let (head, action_dim) = match spec.action_space {
        ActionSpace::Discrete(n) => (HeadKind::Discrete, n),
        ActionSpace::Continuous { dim } => (HeadKind::Gaussian, dim),
    };
    Arch::policy(spec.obs_dim, action_dim, head)
}

/// Number of distinct policy heads and the actor -> head map.
fn head_layout(cfg: &RunConfig, num_actors: usize) -> (usize, Vec<usize>) {
    if cfg.shared_policy {
        (1, vec![0; num_actors])
    } else {
        (num_actors, (0..num_actors).collect())
    }
}

// ── Controller ──────────────────────────────────────────────────

pub struct ControllerCore {
    run_seed: u64,
    scheme: Scheme,
    num_actors: usize,
    head_map: Vec<usize>,
    action_space: ActionSpace,
    orc: OrcConfig,
    reward_scheme: Option<RewardScheme>,
    qr_range: (f64, f64),
    bc_lr: f64,
    bc_steps: u32,
    /// Present for the action-sending schemes.
    learner: Option<Learner>,
    /// Bit-identical copies of the actors' clones (GRASP only), one per
    /// head.
    mirrors: Vec<PolicyParams>,
    mirror_opts: Vec<AdamState>,
    traj: Trajectory,
    step_actions: Vec<Action>,
    pending_reward: Option<f64>,
    epoch_ordinal: u32,
}

impl ControllerCore {
    pub fn new(cfg: &RunConfig, spec: &EnvSpec) -> Result<Self, ProtocolError> {
        let num_actors = spec.num_actors;
        let (n_heads, head_map) = head_layout(cfg, num_actors);
        let arch = policy_arch(spec);

        let mut learner = None;
        let mut mirrors = Vec::new();
        let mut mirror_opts = Vec::new();
        if cfg.scheme.learner_at_controller() {
            let policies: Vec<PolicyParams> = (0..n_heads)
                .map(|h| init_params(super::param_seed(cfg.run_seed, h as u16, 0), &arch))
                .collect();
            let value = init_params(
                super::param_seed(cfg.run_seed, 0, 1),
                &Arch::value(spec.global_obs_dim),
            );
            learner = Some(Learner::with_head_map(
                policies.clone(),
                value,
                cfg.learner.clone(),
                head_map.clone(),
            )?);
            if cfg.scheme == Scheme::Grasp {
                // mirror initialization equals the actors' clone
                // initialization (same seeds), so P = Q at step zero
                mirrors = policies;
                mirror_opts = mirrors.iter().map(|m| AdamState::new(m.len())).collect();
            }
        }

        Ok(ControllerCore {
            run_seed: cfg.run_seed,
            scheme: cfg.scheme,
            num_actors,
            head_map,
            action_space: spec.action_space.clone(),
            orc: cfg.orc_config(),
            reward_scheme: cfg.scheme.reward_scheme(),
            qr_range: cfg.qr_range,
            bc_lr: cfg.bc_lr,
            bc_steps: cfg.bc_steps,
            learner,
            mirrors,
            mirror_opts,
            traj: Trajectory::default(),
            step_actions: Vec::new(),
            pending_reward: None,
            epoch_ordinal: 0,
        })
    }

    pub fn policy_head(&self, actor: usize) -> Option<&PolicyParams> {
        self.learner
            .as_ref()
            .map(|l| &l.policies[self.head_map[actor]])
    }

    pub fn mirror_head(&self, actor: usize) -> Option<&PolicyParams> {
        if self.scheme == Scheme::Grasp {
            Some(&self.mirrors[self.head_map[actor]])
        } else {
            None
        }
    }

    /// Actions recorded while producing this step's messages (empty for
    /// the reward-sending schemes, which never choose actions).
    pub fn recorded_actions(&self) -> &[Action] {
        &self.step_actions
    }

    /// Produce this step's per-actor messages and (for the action-sending
    /// schemes) record the chosen joint action into the epoch buffer.
    pub fn begin_step(
        &mut self,
        coords: StepCoords,
        actor_obs: &[Vec<f64>],
        global_obs: &[f64],
    ) -> Result<Vec<OutboundMessage>, ProtocolError> {
        assert_eq!(actor_obs.len(), self.num_actors);
        self.step_actions.clear();
        let mut out = Vec::new();
        match self.scheme {
            Scheme::Grasp => {
                if self.traj.actor_states.is_empty() {
                    self.traj = empty_traj(self.num_actors);
                }
                for i in 0..self.num_actors {
                    let p = forward(self.policy_head(i).expect("learner"), &actor_obs[i])?;
                    let q = forward(self.mirror_head(i).expect("mirror"), &actor_obs[i])?;
                    let key = coords.key(self.run_seed, i as u16, Purpose::Candidate);
                    let (action, msg) = orc_encode(&p, &q, &self.orc, key)?;
                    let (payload, bits) = index_wire_encode(msg.index)?;
                    out.push(OutboundMessage {
                        wire: WireMessage::new(
                            MessageKind::OrcIndex,
                            i as u16,
                            coords.global_step,
                            payload,
                            bits,
                        ),
                        ideal_bits: msg.ideal_bits,
                    });
                    self.traj.actor_states[i].push(actor_obs[i].clone());
                    self.traj.actor_actions[i].push(action.clone());
                    self.step_actions.push(action);
                }
                self.traj.global_states.push(global_obs.to_vec());
            }
            Scheme::Asc => {
                if self.traj.actor_states.is_empty() {
                    self.traj = empty_traj(self.num_actors);
                }
                for i in 0..self.num_actors {
                    let p = forward(self.policy_head(i).expect("learner"), &actor_obs[i])?;
                    let key = coords.key(self.run_seed, i as u16, Purpose::ActionSample);
                    let sampled = p.sample(key);
                    let (payload, bits) = asc_encode(&sampled, &self.action_space)?;
                    // the decoded value is canonical: for continuous spaces
                    // the wire narrows to binary32, and the controller must
                    // learn from what the actor will actually execute
                    let action = asc_decode(&payload, bits, &self.action_space)?;
                    out.push(OutboundMessage {
                        wire: WireMessage::new(
                            MessageKind::AscAction,
                            i as u16,
                            coords.global_step,
                            payload,
                            bits,
                        ),
                        ideal_bits: asc_bits(&self.action_space) as f64,
                    });
                    self.traj.actor_states[i].push(actor_obs[i].clone());
                    self.traj.actor_actions[i].push(action.clone());
                    self.step_actions.push(action);
                }
                self.traj.global_states.push(global_obs.to_vec());
            }
            _ => {
                if let Some(r) = self.pending_reward.take() {
                    out.extend(self.reward_messages(r, coords.global_step)?);
                }
            }
        }
        Ok(out)
    }

    fn reward_messages(
        &self,
        reward: f64,
        step: u32,
    ) -> Result<Vec<OutboundMessage>, ProtocolError> {
        let rs = self.reward_scheme.expect("reward scheme");
        let mut out = Vec::with_capacity(self.num_actors);
        for i in 0..self.num_actors {
            let (payload, bits) = reward_encode(reward, rs, self.qr_range)?;
            out.push(OutboundMessage {
                wire: WireMessage::new(MessageKind::Reward, i as u16, step, payload, bits),
                ideal_bits: bits as f64,
            });
        }
        Ok(out)
    }

    /// Reward observation after the joint action is executed. The value
    /// must already be binary32-rounded by the engine.
    pub fn observe_reward(
        &mut self,
        reward: f64,
        done: bool,
        next_global: &[f64],
        next_done: bool,
    ) {
        if self.scheme.learner_at_controller() {
            self.traj.rewards.push(reward);
            self.traj.dones.push(done);
            self.traj.next_global_state = next_global.to_vec();
            self.traj.next_done = next_done;
        } else {
            self.pending_reward = Some(reward);
        }
    }

    /// Messages closing an epoch: the pending reward (reward-sending
    /// schemes send the final step's reward here so the actor can learn
    /// from the full window) followed by an epoch mark per actor.
    pub fn epoch_flush(&mut self, step: u32) -> Result<Vec<OutboundMessage>, ProtocolError> {
        let mut out = Vec::new();
        if let Some(r) = self.pending_reward.take() {
            out.extend(self.reward_messages(r, step)?);
        }
        for i in 0..self.num_actors {
            out.push(OutboundMessage {
                wire: WireMessage::epoch_mark(i as u16, step),
                ideal_bits: 0.0,
            });
        }
        Ok(out)
    }

    /// Controller-side epoch work: the reinforcement-learning update on
    /// the learner (action-sending schemes) and the mirror cloning update,
    /// identical to the actors' own. Returns per-head mirror digests for
    /// lockstep verification (GRASP).
    pub fn epoch_update(&mut self, progress: f64) -> Result<Vec<u64>, ProtocolError> {
        let mut digests = Vec::new();
        if let Some(learner) = self.learner.as_mut() {
            let shuffle_key =
                StreamKey::at(self.run_seed, self.epoch_ordinal, 0, 0, Purpose::Shuffle);
            learner.update(&self.traj, shuffle_key, progress)?;

            if self.scheme == Scheme::Grasp {
                let batches = clone_batches(&self.head_map, &self.traj, self.mirrors.len());
                for (h, batch) in batches.into_iter().enumerate() {
                    for _ in 0..self.bc_steps {
                        let (next, _) =
                            bc_update(&self.mirrors[h], &batch, &mut self.mirror_opts[h], self.bc_lr)?;
                        self.mirrors[h] = next;
                    }
                }
                digests = self.mirrors.iter().map(crate::policy::param_digest).collect();
            }
            self.traj = empty_traj(self.num_actors);
        }
        self.epoch_ordinal += 1;
        Ok(digests)
    }

    pub fn learner_policies(&self) -> Option<Vec<PolicyParams>> {
        self.learner.as_ref().map(|l| {
            self.head_map
                .iter()
                .map(|&h| l.policies[h].clone())
                .collect()
        })
    }
}

fn empty_traj(num_actors: usize) -> Trajectory {
    Trajectory {
        actor_states: vec![Vec::new(); num_actors],
        actor_actions: vec![Vec::new(); num_actors],
        ..Default::default()
    }
}

/// Merge the epoch window into one cloning batch per head: actors mapped
/// to the same head contribute in ascending actor order, each in time
/// order. Both the mirrors and the actors build batches with this exact
/// layout, which is what keeps the updates bit-identical.
fn clone_batches(head_map: &[usize], traj: &Trajectory, n_heads: usize) -> Vec<BcBatch> {
    let mut batches = vec![BcBatch::default(); n_heads];
    for (i, &h) in head_map.iter().enumerate() {
        batches[h]
            .states
            .extend(traj.actor_states[i].iter().cloned());
        batches[h]
            .actions
            .extend(traj.actor_actions[i].iter().cloned());
    }
    batches
}

// ── Actor ───────────────────────────────────────────────────────

/// Local learner of a reward-sending actor.
struct LocalLearner {
    learner: Learner,
    rewards: Vec<f64>,
    dones: Vec<bool>,
}

/// One physical actor endpoint. Under `shared_policy` a single core
/// serves every actor id (the actors share weights by construction);
/// otherwise each core owns one id.
pub struct ActorCore {
    run_seed: u64,
    scheme: Scheme,
    ids: Vec<u16>,
    action_space: ActionSpace,
    reward_scheme: Option<RewardScheme>,
    qr_range: (f64, f64),
    bc_lr: f64,
    bc_steps: u32,
    /// Proposal policy cloned from the controller's stream of actions
    /// (action-sending schemes).
    clone: Option<PolicyParams>,
    clone_opt: Option<AdamState>,
    /// Epoch window of (state, action) pairs per local actor.
    obs_log: Vec<Vec<Vec<f64>>>,
    act_log: Vec<Vec<Action>>,
    /// Reward-sending schemes learn here from reconstructed rewards.
    local: Option<LocalLearner>,
    epoch_ordinal: u32,
}

impl ActorCore {
    pub fn new(cfg: &RunConfig, spec: &EnvSpec, ids: Vec<u16>) -> Result<Self, ProtocolError> {
        assert!(!ids.is_empty());
        let arch = policy_arch(spec);
        let head_entity = if cfg.shared_policy { 0 } else { ids[0] };
        let mut clone = None;
        let mut clone_opt = None;
        let mut local = None;
        if cfg.scheme.learner_at_controller() {
            let params = init_params(super::param_seed(cfg.run_seed, head_entity, 0), &arch);
            clone_opt = Some(AdamState::new(params.len()));
            clone = Some(params);
        } else {
            // local learner over this actor's own observations; its policy
            // seed matches the controller-side learner of the
            // action-sending schemes so aligned-seed runs stay comparable
            let policy = init_params(super::param_seed(cfg.run_seed, head_entity, 0), &arch);
            let value = init_params(
                super::param_seed(cfg.run_seed, head_entity, 1),
                &Arch::value(spec.obs_dim),
            );
            local = Some(LocalLearner {
                learner: Learner::new(vec![policy], value, cfg.learner.clone())?,
                rewards: Vec::new(),
                dones: Vec::new(),
            });
        }
        let n = ids.len();
        Ok(ActorCore {
            run_seed: cfg.run_seed,
            scheme: cfg.scheme,
            ids,
            action_space: spec.action_space.clone(),
            reward_scheme: cfg.scheme.reward_scheme(),
            qr_range: cfg.qr_range,
            bc_lr: cfg.bc_lr,
            bc_steps: cfg.bc_steps,
            clone,
            clone_opt,
            obs_log: vec![Vec::new(); n],
            act_log: vec![Vec::new(); n],
            local,
            epoch_ordinal: 0,
        })
    }

    pub fn ids(&self) -> &[u16] {
        &self.ids
    }

    fn local_index(&self, actor_id: u16) -> Result<usize, ProtocolError> {
        self.ids
            .iter()
            .position(|&i| i == actor_id)
            .ok_or(ProtocolError::MissingMessage {
                actor: actor_id,
                step: 0,
            })
    }

    /// Handle a non-action message (reward delivery, epoch marks). The
    /// action-sending schemes accept no reward messages at all: actors are
    /// reward-blind there by construction.
    pub fn deliver(&mut self, msg: &WireMessage) -> Result<(), ProtocolError> {
        match msg.kind {
            MessageKind::Reward => {
                let local = self.local.as_mut().ok_or(ProtocolError::UnexpectedMessage {
                    kind: msg.kind,
                    actor: msg.actor_id,
                })?;
                // every local actor receives the shared reward; record it
                // once (all ids of this core share one learner)
                if msg.actor_id == self.ids[0] {
                    let rs = self.reward_scheme.expect("reward scheme");
                    let r = reward_decode(&msg.payload, msg.payload_bits, rs, self.qr_range)?;
                    local.rewards.push(r);
                }
                Ok(())
            }
            MessageKind::EpochMark => Ok(()),
            kind => Err(ProtocolError::UnexpectedMessage {
                kind,
                actor: msg.actor_id,
            }),
        }
    }

    /// Observe the end of the previous step (episode boundary flag).
    pub fn note_prev_done(&mut self, done: bool) {
        if let Some(local) = self.local.as_mut() {
            local.dones.push(done);
        }
    }

    /// Decide this actor's action for the step: decode the controller's
    /// guidance (action-sending schemes) or sample the locally learned
    /// policy (reward-sending schemes).
    pub fn act(
        &mut self,
        coords: StepCoords,
        actor_id: u16,
        obs: &[f64],
        msg: Option<&WireMessage>,
    ) -> Result<Action, ProtocolError> {
        let li = self.local_index(actor_id)?;
        let action = match self.scheme {
            Scheme::Grasp => {
                let msg = msg.ok_or(ProtocolError::MissingMessage {
                    actor: actor_id,
                    step: coords.global_step,
                })?;
                if msg.kind != MessageKind::OrcIndex {
                    return Err(ProtocolError::UnexpectedMessage {
                        kind: msg.kind,
                        actor: actor_id,
                    });
                }
                let index = crate::codec::index_wire_decode(&msg.payload, msg.payload_bits)?;
                let q = forward(self.clone.as_ref().expect("clone"), obs)?;
                let emsg = EncodedMessage {
                    index,
                    ideal_bits: 0.0,
                    wire_bits: msg.payload_bits,
                };
                orc_decode(
                    &emsg,
                    &q,
                    coords.key(self.run_seed, actor_id, Purpose::Candidate),
                )
            }
            Scheme::Asc => {
                let msg = msg.ok_or(ProtocolError::MissingMessage {
                    actor: actor_id,
                    step: coords.global_step,
                })?;
                if msg.kind != MessageKind::AscAction {
                    return Err(ProtocolError::UnexpectedMessage {
                        kind: msg.kind,
                        actor: actor_id,
                    });
                }
                asc_decode(&msg.payload, msg.payload_bits, &self.action_space)?
            }
            _ => {
                if let Some(m) = msg {
                    self.deliver(m)?;
                }
                let local = self.local.as_ref().expect("local learner");
                let p = forward(&local.learner.policies[0], obs)?;
                p.sample(coords.key(self.run_seed, actor_id, Purpose::ActionSample))
            }
        };
        self.obs_log[li].push(obs.to_vec());
        self.act_log[li].push(action.clone());
        Ok(action)
    }

    /// Actor-side epoch work: the supervised cloning update (action-
    /// sending schemes) or the local reinforcement-learning update
    /// (reward-sending schemes). Returns the updated policy snapshot for
    /// instrumentation.
    pub fn epoch_update(
        &mut self,
        next_obs: &[Vec<f64>],
        next_done: bool,
        progress: f64,
    ) -> Result<PolicyParams, ProtocolError> {
        let snapshot = if let Some(clone) = self.clone.as_mut() {
            // merged batch in ascending actor order, matching the
            // controller's mirror update exactly
            let mut batch = BcBatch::default();
            for li in 0..self.ids.len() {
                batch.states.extend(self.obs_log[li].iter().cloned());
                batch.actions.extend(self.act_log[li].iter().cloned());
            }
            if batch.is_empty() {
                return Err(ProtocolError::BadConfig("epoch update on empty window".into()));
            }
            let opt = self.clone_opt.as_mut().expect("opt");
            for _ in 0..self.bc_steps {
                let (next, _) = bc_update(clone, &batch, opt, self.bc_lr)?;
                *clone = next;
            }
            clone.clone()
        } else {
            let local = self.local.as_mut().expect("local learner");
            local.dones.push(next_done);
            let t = self.obs_log[0].len();
            if local.rewards.len() != t || local.dones.len() != t {
                return Err(ProtocolError::MissingMessage {
                    actor: self.ids[0],
                    step: t as u32,
                });
            }
            let traj = Trajectory {
                actor_states: vec![self.obs_log[0].clone()],
                actor_actions: vec![self.act_log[0].clone()],
                global_states: self.obs_log[0].clone(),
                rewards: std::mem::take(&mut local.rewards),
                dones: std::mem::take(&mut local.dones),
                next_global_state: next_obs[0].clone(),
                next_done,
            };
            let shuffle_key = StreamKey::at(
                self.run_seed,
                self.epoch_ordinal,
                0,
                self.ids[0],
                Purpose::Shuffle,
            );
            local.learner.update(&traj, shuffle_key, progress)?;
            local.learner.policies[0].clone()
        };
        for log in self.obs_log.iter_mut() {
            log.clear();
        }
        for log in self.act_log.iter_mut() {
            log.clear();
        }
        self.epoch_ordinal += 1;
        Ok(snapshot)
    }

    /// Current proposal/learner policy (instrumentation; epoch-constant).
    pub fn policy_snapshot(&self) -> PolicyParams {
        match (&self.clone, &self.local) {
            (Some(c), _) => c.clone(),
            (_, Some(l)) => l.learner.policies[0].clone(),
            _ => unreachable!("actor always has a policy"),
        }
    }
}
