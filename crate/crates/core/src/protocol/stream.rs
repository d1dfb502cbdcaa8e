//! Byte-stream transport: controller and actors on separate threads.
//!
//! Every interaction crosses a FIFO channel as framed bytes with a
//! per-step barrier (the controller waits for each actor's action frame
//! before stepping the environment). Actor-side state is driven by the
//! same [`ActorCore`] as the in-process transport, so a run over this
//! transport produces a bit-identical ledger — that equality is the
//! lockstep story end to end.
//!
//! Control frames carry what the deployment gets from the environment for
//! free (observations in, executed actions out) plus parameter snapshots
//! for instrumentation; none of it is accounted communication.

use super::core::ActorCore;
use super::engine::{actor_groups, run_with_endpoints, ActorEndpoint};
use super::frame::{any_frame_decode, control_encode, frame_encode, ControlKind, Frame};
use super::{ProtocolError, RunConfig, RunLedger, StepCoords, WireMessage};
use crate::codec::ActionSpace;
use crate::dist::Action;
use crate::envs::make_env;
use crate::policy::{checkpoint_bytes, checkpoint_parse, PolicyParams};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread::JoinHandle;

const MODE_STEP: u8 = 0;
const MODE_EPOCH: u8 = 1;
const DONE_NONE: u8 = 2;

pub(crate) fn run_stream(cfg: &RunConfig) -> Result<RunLedger, ProtocolError> {
    let spec = make_env(&cfg.env)?.spec().clone();
    let mut endpoints: Vec<Box<dyn ActorEndpoint>> = Vec::new();
    for ids in actor_groups(cfg, spec.num_actors) {
        endpoints.push(Box::new(StreamEndpoint::spawn(cfg.clone(), ids)?));
    }
    run_with_endpoints(cfg, endpoints)
}

struct StreamEndpoint {
    ids: Vec<u16>,
    action_space: ActionSpace,
    obs_dim: usize,
    to_actor: Sender<Vec<u8>>,
    from_actor: Receiver<Vec<u8>>,
    handle: Option<JoinHandle<Result<(), ProtocolError>>>,
}

impl StreamEndpoint {
    fn spawn(cfg: RunConfig, ids: Vec<u16>) -> Result<Self, ProtocolError> {
        let spec = make_env(&cfg.env)?.spec().clone();
        let (to_actor, actor_rx) = channel::<Vec<u8>>();
        let (actor_tx, from_actor) = channel::<Vec<u8>>();
        let thread_ids = ids.clone();
        let action_space = spec.action_space.clone();
        let obs_dim = spec.obs_dim;
        let handle = std::thread::spawn(move || {
            let core = ActorCore::new(&cfg, &spec, thread_ids)?;
            actor_thread(core, spec.obs_dim, spec.action_space.clone(), actor_rx, actor_tx)
        });
        Ok(StreamEndpoint {
            ids,
            action_space,
            obs_dim,
            to_actor,
            from_actor,
            handle: Some(handle),
        })
    }

    fn send(&self, frame: Vec<u8>) -> Result<(), ProtocolError> {
        self.to_actor
            .send(frame)
            .map_err(|_| ProtocolError::ChannelClosed)
    }

    fn recv(&self) -> Result<Vec<u8>, ProtocolError> {
        self.from_actor
            .recv()
            .map_err(|_| ProtocolError::ChannelClosed)
    }
}

impl ActorEndpoint for StreamEndpoint {
    fn ids(&self) -> Vec<u16> {
        self.ids.clone()
    }

    fn step(
        &mut self,
        coords: StepCoords,
        prev_done: Option<bool>,
        obs: &[Vec<f64>],
        msgs: &[WireMessage],
    ) -> Result<Vec<Action>, ProtocolError> {
        let mut payload = Vec::new();
        payload.push(MODE_STEP);
        payload.extend_from_slice(&coords.episode.to_le_bytes());
        payload.extend_from_slice(&coords.step_in_episode.to_le_bytes());
        payload.push(match prev_done {
            None => DONE_NONE,
            Some(false) => 0,
            Some(true) => 1,
        });
        payload.push(msgs.len() as u8);
        for ob in obs {
            debug_assert_eq!(ob.len(), self.obs_dim);
            for v in ob {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        self.send(control_encode(
            ControlKind::Obs,
            self.ids[0],
            coords.global_step,
            &payload,
        ))?;
        for m in msgs {
            self.send(frame_encode(m))?;
        }
        let reply = self.recv()?;
        match any_frame_decode(&reply)? {
            (
                Frame::Control {
                    kind: ControlKind::ActionReturn,
                    payload,
                    ..
                },
                _,
            ) => deserialize_actions(&payload, self.ids.len(), &self.action_space),
            other => Err(ProtocolError::BadFrame(format!(
                "expected action return, got {other:?}"
            ))),
        }
    }

    fn epoch(
        &mut self,
        flush: &[WireMessage],
        next_obs: &[Vec<f64>],
        next_done: bool,
        progress: f64,
    ) -> Result<PolicyParams, ProtocolError> {
        let mut payload = Vec::new();
        payload.push(MODE_EPOCH);
        payload.extend_from_slice(&0u32.to_le_bytes());
        payload.extend_from_slice(&0u32.to_le_bytes());
        payload.push(next_done as u8);
        payload.push(flush.len() as u8);
        payload.extend_from_slice(&progress.to_le_bytes());
        for ob in next_obs {
            for v in ob {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        self.send(control_encode(ControlKind::Obs, self.ids[0], 0, &payload))?;
        for m in flush {
            self.send(frame_encode(m))?;
        }
        let reply = self.recv()?;
        match any_frame_decode(&reply)? {
            (
                Frame::Control {
                    kind: ControlKind::ParamSnapshot,
                    payload,
                    ..
                },
                _,
            ) => Ok(checkpoint_parse(&payload)?),
            other => Err(ProtocolError::BadFrame(format!(
                "expected param snapshot, got {other:?}"
            ))),
        }
    }

    fn shutdown(&mut self) -> Result<(), ProtocolError> {
        let _ = self.send(control_encode(ControlKind::Shutdown, self.ids[0], 0, &[]));
        if let Some(handle) = self.handle.take() {
            handle.join().map_err(|_| ProtocolError::ChannelClosed)??;
        }
        Ok(())
    }
}

fn actor_thread(
    mut core: ActorCore,
    obs_dim: usize,
    action_space: ActionSpace,
    rx: Receiver<Vec<u8>>,
    tx: Sender<Vec<u8>>,
) -> Result<(), ProtocolError> {
    let n_ids = core.ids().len();
    let first_id = core.ids()[0];
    loop {
        let bytes = rx.recv().map_err(|_| ProtocolError::ChannelClosed)?;
        let (frame, _) = any_frame_decode(&bytes)?;
        let (kind, global_step, payload) = match frame {
            Frame::Control {
                kind,
                step,
                payload,
                ..
            } => (kind, step, payload),
            Frame::Message(m) => {
                return Err(ProtocolError::BadFrame(format!(
                    "protocol frame {:?} outside a step envelope",
                    m.kind
                )))
            }
        };
        match kind {
            ControlKind::Shutdown => return Ok(()),
            ControlKind::Obs => {
                if payload.len() < 11 {
                    return Err(ProtocolError::BadFrame("short obs envelope".into()));
                }
                let mode = payload[0];
                let episode = u32::from_le_bytes(payload[1..5].try_into().unwrap());
                let step_in_episode = u32::from_le_bytes(payload[5..9].try_into().unwrap());
                let done_flag = payload[9];
                let n_msgs = payload[10] as usize;
                let mut off = 11;
                let progress = if mode == MODE_EPOCH {
                    let p = f64::from_le_bytes(payload[off..off + 8].try_into().unwrap());
                    off += 8;
                    p
                } else {
                    0.0
                };
                let mut obs = Vec::with_capacity(n_ids);
                for _ in 0..n_ids {
                    let mut ob = Vec::with_capacity(obs_dim);
                    for _ in 0..obs_dim {
                        ob.push(f64::from_le_bytes(payload[off..off + 8].try_into().unwrap()));
                        off += 8;
                    }
                    obs.push(ob);
                }
                let mut msgs = Vec::with_capacity(n_msgs);
                for _ in 0..n_msgs {
                    let bytes = rx.recv().map_err(|_| ProtocolError::ChannelClosed)?;
                    match any_frame_decode(&bytes)? {
                        (Frame::Message(m), _) => msgs.push(m),
                        (other, _) => {
                            return Err(ProtocolError::BadFrame(format!(
                                "expected protocol frame, got {other:?}"
                            )))
                        }
                    }
                }
                if mode == MODE_STEP {
                    if done_flag != DONE_NONE {
                        core.note_prev_done(done_flag == 1);
                    }
                    let coords = StepCoords {
                        episode,
                        step_in_episode,
                        global_step,
                    };
                    let ids = core.ids().to_vec();
                    let mut actions = Vec::with_capacity(n_ids);
                    for (k, &id) in ids.iter().enumerate() {
                        let msg = msgs.iter().find(|m| m.actor_id == id);
                        actions.push(core.act(coords, id, &obs[k], msg)?);
                    }
                    let reply = serialize_actions(&actions, &action_space);
                    tx.send(control_encode(
                        ControlKind::ActionReturn,
                        first_id,
                        global_step,
                        &reply,
                    ))
                    .map_err(|_| ProtocolError::ChannelClosed)?;
                } else {
                    for m in &msgs {
                        core.deliver(m)?;
                    }
                    let snapshot = core.epoch_update(&obs, done_flag == 1, progress)?;
                    tx.send(control_encode(
                        ControlKind::ParamSnapshot,
                        first_id,
                        global_step,
                        &checkpoint_bytes(&snapshot),
                    ))
                    .map_err(|_| ProtocolError::ChannelClosed)?;
                }
            }
            other => {
                return Err(ProtocolError::BadFrame(format!(
                    "unexpected control frame {other:?}"
                )))
            }
        }
    }
}

fn serialize_actions(actions: &[Action], space: &ActionSpace) -> Vec<u8> {
    let mut out = Vec::new();
    for a in actions {
        match (a, space) {
            (Action::Discrete(v), ActionSpace::Discrete(_)) => {
                out.extend_from_slice(&(*v as u32).to_le_bytes());
            }
            (Action::Continuous(x), ActionSpace::Continuous { .. }) => {
                for v in x {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            _ => unreachable!("actor actions match the space"),
        }
    }
    out
}

fn deserialize_actions(
    bytes: &[u8],
    n: usize,
    space: &ActionSpace,
) -> Result<Vec<Action>, ProtocolError> {
    let mut out = Vec::with_capacity(n);
    let mut off = 0;
    for _ in 0..n {
        match space {
            ActionSpace::Discrete(_) => {
                if off + 4 > bytes.len() {
                    return Err(ProtocolError::BadFrame("short action return".into()));
                }
                let v = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
                off += 4;
                out.push(Action::Discrete(v as usize));
            }
            ActionSpace::Continuous { dim } => {
                let mut x = Vec::with_capacity(*dim);
                for _ in 0..*dim {
                    if off + 8 > bytes.len() {
                        return Err(ProtocolError::BadFrame("short action return".into()));
                    }
                    x.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
                    off += 8;
                }
                out.push(Action::Continuous(x));
            }
        }
    }
    Ok(out)
}
