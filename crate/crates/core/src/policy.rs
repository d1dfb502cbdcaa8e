//! Tiny MLP policies and the deterministic updates that keep remote copies
//! in lockstep.
//!
//! Parameters live in one flat `f64` array described by an [`Arch`]; the
//! same deterministic Adam step applied to the same batch on two replicas
//! produces bit-identical parameters, which is what lets the controller
//! mirror each actor's clone without ever transmitting weights.
//!
//! Training losses use natural-log likelihoods on the raw softmax /
//! Gaussian head (no probability floor); the floor in [`crate::dist`] only
//! applies to the emitted [`Distribution`] values used for communication
//! and KL accounting.

use crate::dist::{Action, Categorical, DiagGaussian, Distribution, STD_MAX, STD_MIN};
use crate::prng::{uniform64, Purpose, StreamKey};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("state dimension {0} does not match architecture input {1}")]
    StateDim(usize, usize),
    #[error("batch is empty or inconsistent with the architecture")]
    BadBatch,
    #[error("loss is not finite: {0}")]
    NanLoss(f64),
    #[error("head kind does not support this operation")]
    WrongHead,
    #[error("malformed checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Output head of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// Softmax over `action_dim` logits.
    Discrete,
    /// State-dependent mean with a state-independent log-std vector.
    Gaussian,
    /// Single linear output (value function).
    Scalar,
}

/// Network shape: `input -> hidden... -> head`, tanh activations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub head: HeadKind,
    pub action_dim: usize,
}

impl Arch {
    pub fn policy(input_dim: usize, action_dim: usize, head: HeadKind) -> Self {
        Arch {
            input_dim,
            hidden: vec![32, 32],
            head,
            action_dim,
        }
    }

    pub fn value(input_dim: usize) -> Self {
        Arch {
            input_dim,
            hidden: vec![32, 32],
            head: HeadKind::Scalar,
            action_dim: 1,
        }
    }

    /// Layer shapes as (fan_in, fan_out) pairs, head last.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.action_dim));
        dims
    }

    /// Total parameter count (weights + biases + log-std for Gaussian).
    pub fn param_count(&self) -> usize {
        let mut n: usize = self.layer_dims().iter().map(|(i, o)| i * o + o).sum();
        if self.head == HeadKind::Gaussian {
            n += self.action_dim;
        }
        n
    }
}

/// Flat parameter vector plus its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    arch: Arch,
    data: Vec<f64>,
}

/// Offsets of one dense layer inside the flat array.
#[derive(Debug, Clone, Copy)]
struct LayerView {
    w_off: usize,
    b_off: usize,
    fan_in: usize,
    fan_out: usize,
}

fn layer_views(arch: &Arch) -> Vec<LayerView> {
    let mut views = Vec::new();
    let mut off = 0;
    for (fan_in, fan_out) in arch.layer_dims() {
        views.push(LayerView {
            w_off: off,
            b_off: off + fan_in * fan_out,
            fan_in,
            fan_out,
        });
        off += fan_in * fan_out + fan_out;
    }
    views
}

impl PolicyParams {
    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access for optimizer steps. Callers touching a Gaussian
    /// head must re-clamp the log-std afterwards.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn log_std_range(&self) -> Option<std::ops::Range<usize>> {
        match self.arch.head {
            HeadKind::Gaussian => {
                let n = self.data.len();
                Some(n - self.arch.action_dim..n)
            }
            _ => None,
        }
    }

    /// Clamp log-std entries into the legal band. Applied after every
    /// update so a constructed distribution always satisfies the dist
    /// invariants.
    pub fn clamp_log_std(&mut self) {
        if let Some(range) = self.log_std_range() {
            for v in &mut self.data[range] {
                *v = v.clamp(STD_MIN.ln(), STD_MAX.ln());
            }
        }
    }
}

/// Deterministic fan-in-scaled initialization: weights uniform in
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` drawn at `purpose = ParamInit`,
/// counter walking the weight entries in layout order; biases and log-std
/// start at zero. Equal seed and architecture give bit-identical
/// parameters.
pub fn init_params(seed: u64, arch: &Arch) -> PolicyParams {
    let key = StreamKey::new(seed, Purpose::ParamInit);
    let mut data = vec![0.0; arch.param_count()];
    let mut counter = 0u64;
    for view in layer_views(arch) {
        let scale = 1.0 / (view.fan_in as f64).sqrt();
        for i in 0..view.fan_in * view.fan_out {
            let u = uniform64(key.with_counter(counter));
            data[view.w_off + i] = (2.0 * u - 1.0) * scale;
            counter += 1;
        }
    }
    PolicyParams {
        arch: arch.clone(),
        data,
    }
}

/// Post-activation values of every layer, kept for backprop.
struct Trace {
    /// acts[0] is the input; acts[l] the tanh output of hidden layer l.
    acts: Vec<Vec<f64>>,
    /// Raw linear head output.
    head: Vec<f64>,
}

fn forward_trace(params: &PolicyParams, state: &[f64]) -> Result<Trace, PolicyError> {
    if state.len() != params.arch.input_dim {
        return Err(PolicyError::StateDim(state.len(), params.arch.input_dim));
    }
    let views = layer_views(&params.arch);
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(views.len());
    acts.push(state.to_vec());
    let n_hidden = views.len() - 1;
    for (l, view) in views.iter().enumerate() {
        let input = &acts[l];
        let mut out = vec![0.0; view.fan_out];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &params.data[view.w_off + i * view.fan_in..view.w_off + (i + 1) * view.fan_in];
            let mut acc = params.data[view.b_off + i];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            *o = acc;
        }
        if l < n_hidden {
            for o in &mut out {
                *o = o.tanh();
            }
            acts.push(out);
        } else {
            return Ok(Trace { acts, head: out });
        }
    }
    unreachable!("head layer always present")
}

/// Accumulate parameter gradients for a head-output gradient `d_head`.
fn backprop(params: &PolicyParams, trace: &Trace, d_head: &[f64], grad: &mut [f64]) {
    let views = layer_views(&params.arch);
    let mut d_out = d_head.to_vec();
    for (l, view) in views.iter().enumerate().rev() {
        let input = &trace.acts[l];
        let mut d_in = vec![0.0; view.fan_in];
        for i in 0..view.fan_out {
            let di = d_out[i];
            grad[view.b_off + i] += di;
            let w_row = view.w_off + i * view.fan_in;
            for j in 0..view.fan_in {
                grad[w_row + j] += di * input[j];
                d_in[j] += di * params.data[w_row + j];
            }
        }
        if l > 0 {
            // chain through the tanh of the layer below
            for (d, a) in d_in.iter_mut().zip(&trace.acts[l]) {
                *d *= 1.0 - a * a;
            }
        }
        d_out = d_in;
    }
}

/// Policy distribution at a state (clamped per the dist-module invariants).
pub fn forward(params: &PolicyParams, state: &[f64]) -> Result<Distribution, PolicyError> {
    let trace = forward_trace(params, state)?;
    match params.arch.head {
        HeadKind::Discrete => {
            let probs = softmax(&trace.head);
            Ok(Categorical::new(probs).expect("softmax output is valid").into())
        }
        HeadKind::Gaussian => {
            let range = params.log_std_range().expect("gaussian head");
            let std = params.data[range].iter().map(|l| l.exp()).collect();
            Ok(DiagGaussian::new(trace.head, std)
                .expect("finite head output")
                .into())
        }
        HeadKind::Scalar => Err(PolicyError::WrongHead),
    }
}

/// Value estimate at a state (scalar head).
pub fn forward_value(params: &PolicyParams, state: &[f64]) -> Result<f64, PolicyError> {
    if params.arch.head != HeadKind::Scalar {
        return Err(PolicyError::WrongHead);
    }
    Ok(forward_trace(params, state)?.head[0])
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Supervised-learning batch of observed state/action pairs.
#[derive(Debug, Clone, Default)]
pub struct BcBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
}

impl BcBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Mean negative log-likelihood (nats) of a weighted batch, with its
/// gradient. Weight 1 everywhere gives the behavioral-cloning loss; signed
/// weights give the policy-gradient surrogate.
pub fn weighted_nll_and_grad(
    params: &PolicyParams,
    states: &[Vec<f64>],
    actions: &[Action],
    weights: &[f64],
) -> Result<(f64, Vec<f64>), PolicyError> {
    if states.is_empty() || states.len() != actions.len() || states.len() != weights.len() {
        return Err(PolicyError::BadBatch);
    }
    let scale = 1.0 / states.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.data.len()];
    for ((s, a), &w) in states.iter().zip(actions).zip(weights) {
        let trace = forward_trace(params, s)?;
        match (params.arch.head, a) {
            (HeadKind::Discrete, Action::Discrete(ai)) => {
                if *ai >= params.arch.action_dim {
                    return Err(PolicyError::BadBatch);
                }
                let probs = softmax(&trace.head);
                loss += -w * probs[*ai].ln() * scale;
                let mut d_head: Vec<f64> = probs.iter().map(|p| w * p * scale).collect();
                d_head[*ai] -= w * scale;
                backprop(params, &trace, &d_head, &mut grad);
            }
            (HeadKind::Gaussian, Action::Continuous(x)) => {
                if x.len() != params.arch.action_dim {
                    return Err(PolicyError::BadBatch);
                }
                let range = params.log_std_range().expect("gaussian head");
                let log_std = &params.data[range.clone()];
                let mut d_head = vec![0.0; params.arch.action_dim];
                for k in 0..params.arch.action_dim {
                    let sigma = log_std[k].exp();
                    let z = (x[k] - trace.head[k]) / sigma;
                    loss += w * (0.5 * z * z + log_std[k] + 0.5 * (std::f64::consts::TAU).ln())
                        * scale;
                    d_head[k] = -w * z / sigma * scale;
                    grad[range.start + k] += w * (1.0 - z * z) * scale;
                }
                backprop(params, &trace, &d_head, &mut grad);
            }
            _ => return Err(PolicyError::BadBatch),
        }
    }
    if !loss.is_finite() {
        return Err(PolicyError::NanLoss(loss));
    }
    Ok((loss, grad))
}

/// Log-likelihood (nats) of one action under the raw (unfloored) head.
pub fn action_log_prob_nats(
    params: &PolicyParams,
    state: &[f64],
    action: &Action,
) -> Result<f64, PolicyError> {
    let trace = forward_trace(params, state)?;
    match (params.arch.head, action) {
        (HeadKind::Discrete, Action::Discrete(ai)) => {
            if *ai >= params.arch.action_dim {
                return Err(PolicyError::BadBatch);
            }
            Ok(softmax(&trace.head)[*ai].ln())
        }
        (HeadKind::Gaussian, Action::Continuous(x)) => {
            if x.len() != params.arch.action_dim {
                return Err(PolicyError::BadBatch);
            }
            let range = params.log_std_range().expect("gaussian head");
            let log_std = &params.data[range];
            let mut ll = 0.0;
            for k in 0..params.arch.action_dim {
                let sigma = log_std[k].exp();
                let z = (x[k] - trace.head[k]) / sigma;
                ll += -0.5 * z * z - log_std[k] - 0.5 * (std::f64::consts::TAU).ln();
            }
            Ok(ll)
        }
        _ => Err(PolicyError::BadBatch),
    }
}

/// Entropy (nats) of the policy at a state, with its parameter gradient
/// accumulated into `grad` scaled by `weight`.
pub fn entropy_and_grad(
    params: &PolicyParams,
    state: &[f64],
    weight: f64,
    grad: &mut [f64],
) -> Result<f64, PolicyError> {
    let trace = forward_trace(params, state)?;
    match params.arch.head {
        HeadKind::Discrete => {
            let probs = softmax(&trace.head);
            let h: f64 = -probs.iter().map(|p| p * p.ln()).sum::<f64>();
            let d_head: Vec<f64> = probs.iter().map(|p| -weight * p * (p.ln() + h)).collect();
            backprop(params, &trace, &d_head, grad);
            Ok(h)
        }
        HeadKind::Gaussian => {
            let range = params.log_std_range().expect("gaussian head");
            let log_std = &params.data[range.clone()];
            let h: f64 = log_std
                .iter()
                .map(|l| 0.5 * (std::f64::consts::TAU * std::f64::consts::E).ln() + l)
                .sum();
            for k in 0..params.arch.action_dim {
                grad[range.start + k] += weight;
            }
            Ok(h)
        }
        HeadKind::Scalar => Err(PolicyError::WrongHead),
    }
}

/// Mean squared error `0.5 (v - target)^2` of the value head, with
/// gradient.
pub fn value_mse_and_grad(
    params: &PolicyParams,
    states: &[Vec<f64>],
    targets: &[f64],
) -> Result<(f64, Vec<f64>), PolicyError> {
    if states.is_empty() || states.len() != targets.len() {
        return Err(PolicyError::BadBatch);
    }
    if params.arch.head != HeadKind::Scalar {
        return Err(PolicyError::WrongHead);
    }
    let scale = 1.0 / states.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.data.len()];
    for (s, &target) in states.iter().zip(targets) {
        let trace = forward_trace(params, s)?;
        let err = trace.head[0] - target;
        loss += 0.5 * err * err * scale;
        backprop(params, &trace, &[err * scale], &mut grad);
    }
    if !loss.is_finite() {
        return Err(PolicyError::NanLoss(loss));
    }
    Ok((loss, grad))
}

/// Adam with the published constants beta1 = 0.9, beta2 = 0.999,
/// eps = 1e-8. Bit-deterministic given the same parameter, gradient and
/// state values.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step(&mut self, data: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(data.len(), grad.len());
        assert_eq!(data.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..data.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// One full-batch Adam step on the mean behavioral-cloning NLL. No
/// shuffling, no dropout: two replicas fed the same batch in the same
/// order stay bit-identical.
pub fn bc_update(
    params: &PolicyParams,
    batch: &BcBatch,
    opt: &mut AdamState,
    lr: f64,
) -> Result<(PolicyParams, f64), PolicyError> {
    if batch.is_empty() || batch.states.len() != batch.actions.len() {
        return Err(PolicyError::BadBatch);
    }
    let weights = vec![1.0; batch.len()];
    let (loss, grad) = weighted_nll_and_grad(params, &batch.states, &batch.actions, &weights)?;
    let mut next = params.clone();
    opt.step(&mut next.data, &grad, lr);
    next.clamp_log_std();
    Ok((next, loss))
}

/// Compare the analytic NLL gradient against central finite differences
/// (h = 1e-5). Returns the maximum relative error over all parameters.
pub fn nll_grad_check(params: &PolicyParams, batch: &BcBatch) -> Result<f64, PolicyError> {
    let weights = vec![1.0; batch.len()];
    let (_, grad) = weighted_nll_and_grad(params, &batch.states, &batch.actions, &weights)?;
    let h = 1e-5;
    let mut max_err = 0.0f64;
    for i in 0..params.data.len() {
        let mut plus = params.clone();
        plus.data[i] += h;
        let mut minus = params.clone();
        minus.data[i] -= h;
        let (lp, _) = weighted_nll_and_grad(&plus, &batch.states, &batch.actions, &weights)?;
        let (lm, _) = weighted_nll_and_grad(&minus, &batch.states, &batch.actions, &weights)?;
        let fd = (lp - lm) / (2.0 * h);
        let denom = grad[i].abs().max(fd.abs()).max(1e-4);
        max_err = max_err.max((grad[i] - fd).abs() / denom);
    }
    Ok(max_err)
}

// ── Checkpoint format ───────────────────────────────────────────
//
// magic "RRLP", u16 version = 1, u8 head kind, u8 zero, u32 input_dim,
// u32 action_dim, u32 hidden-layer count, u32 per hidden size, u64
// parameter count, then the flat f64 array. All integers and floats
// little-endian.

const CHECKPOINT_MAGIC: &[u8; 4] = b"RRLP";
const CHECKPOINT_VERSION: u16 = 1;

fn head_tag(head: HeadKind) -> u8 {
    match head {
        HeadKind::Discrete => 0,
        HeadKind::Gaussian => 1,
        HeadKind::Scalar => 2,
    }
}

pub fn checkpoint_bytes(params: &PolicyParams) -> Vec<u8> {
    let arch = &params.arch;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(head_tag(arch.head));
    out.push(0);
    out.extend_from_slice(&(arch.input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(arch.action_dim as u32).to_le_bytes());
    out.extend_from_slice(&(arch.hidden.len() as u32).to_le_bytes());
    for &h in &arch.hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.data.len() as u64).to_le_bytes());
    for v in &params.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn checkpoint_parse(bytes: &[u8]) -> Result<PolicyParams, PolicyError> {
    let mut cur = std::io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(PolicyError::BadCheckpoint("bad magic".into()));
    }
    let mut u16b = [0u8; 2];
    cur.read_exact(&mut u16b)?;
    if u16::from_le_bytes(u16b) != CHECKPOINT_VERSION {
        return Err(PolicyError::BadCheckpoint("unsupported version".into()));
    }
    let mut b2 = [0u8; 2];
    cur.read_exact(&mut b2)?;
    let head = match b2[0] {
        0 => HeadKind::Discrete,
        1 => HeadKind::Gaussian,
        2 => HeadKind::Scalar,
        t => return Err(PolicyError::BadCheckpoint(format!("unknown head tag {t}"))),
    };
    let mut u32b = [0u8; 4];
    cur.read_exact(&mut u32b)?;
    let input_dim = u32::from_le_bytes(u32b) as usize;
    cur.read_exact(&mut u32b)?;
    let action_dim = u32::from_le_bytes(u32b) as usize;
    cur.read_exact(&mut u32b)?;
    let n_hidden = u32::from_le_bytes(u32b) as usize;
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        cur.read_exact(&mut u32b)?;
        hidden.push(u32::from_le_bytes(u32b) as usize);
    }
    let arch = Arch {
        input_dim,
        hidden,
        head,
        action_dim,
    };
    let mut u64b = [0u8; 8];
    cur.read_exact(&mut u64b)?;
    let count = u64::from_le_bytes(u64b) as usize;
    if count != arch.param_count() {
        return Err(PolicyError::BadCheckpoint(format!(
            "count {count} does not match architecture ({})",
            arch.param_count()
        )));
    }
    let mut data = Vec::with_capacity(count);
    let mut f64b = [0u8; 8];
    for _ in 0..count {
        cur.read_exact(&mut f64b)?;
        data.push(f64::from_le_bytes(f64b));
    }
    Ok(PolicyParams { arch, data })
}

pub fn checkpoint_save(params: &PolicyParams, path: &std::path::Path) -> Result<(), PolicyError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&checkpoint_bytes(params))?;
    Ok(())
}

pub fn checkpoint_load(path: &std::path::Path) -> Result<PolicyParams, PolicyError> {
    checkpoint_parse(&std::fs::read(path)?)
}

/// FNV-1a 64-bit digest over the canonical checkpoint serialization. This
/// is the published hash used by the protocol's lockstep assertions.
pub fn param_digest(params: &PolicyParams) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in checkpoint_bytes(params) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_discrete() -> Arch {
        Arch {
            input_dim: 3,
            hidden: vec![4, 4],
            head: HeadKind::Discrete,
            action_dim: 3,
        }
    }

    fn small_gaussian() -> Arch {
        Arch {
            input_dim: 2,
            hidden: vec![4],
            head: HeadKind::Gaussian,
            action_dim: 2,
        }
    }

    fn sample_batch(params: &PolicyParams, n: usize, seed: u64) -> BcBatch {
        let key = StreamKey::new(seed, Purpose::ActionSample);
        let mut batch = BcBatch::default();
        for i in 0..n {
            let s: Vec<f64> = (0..params.arch().input_dim)
                .map(|j| 2.0 * uniform64(key.with_counter((i * 16 + j) as u64)) - 1.0)
                .collect();
            let d = forward(params, &s).unwrap();
            let a = d.sample(key.with_counter((1000 + i) as u64));
            batch.states.push(s);
            batch.actions.push(a);
        }
        batch
    }

    #[test]
    fn init_is_deterministic() {
        let arch = small_discrete();
        assert_eq!(init_params(7, &arch), init_params(7, &arch));
        assert_ne!(init_params(7, &arch).data(), init_params(8, &arch).data());
    }

    #[test]
    fn zero_weight_network_is_uniform() {
        let arch = Arch::policy(4, 3, HeadKind::Discrete);
        let params = PolicyParams {
            arch: arch.clone(),
            data: vec![0.0; arch.param_count()],
        };
        let d = forward(&params, &[0.1, -0.2, 0.3, 0.4]).unwrap();
        match d {
            Distribution::Categorical(c) => {
                for &p in c.probs() {
                    assert!((p - 1.0 / 3.0).abs() < 1e-12);
                }
            }
            _ => panic!("expected categorical"),
        }
    }

    #[test]
    fn zero_weight_gaussian_is_standard_normal() {
        let arch = Arch::policy(2, 2, HeadKind::Gaussian);
        let params = PolicyParams {
            arch: arch.clone(),
            data: vec![0.0; arch.param_count()],
        };
        let d = forward(&params, &[0.5, -0.5]).unwrap();
        match d {
            Distribution::DiagGaussian(g) => {
                assert_eq!(g.mean(), &[0.0, 0.0]);
                assert_eq!(g.std(), &[1.0, 1.0]);
            }
            _ => panic!("expected gaussian"),
        }
    }

    #[test]
    fn state_dim_checked() {
        let params = init_params(1, &small_discrete());
        assert!(forward(&params, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn grad_check_discrete() {
        let params = init_params(42, &small_discrete());
        let batch = sample_batch(&params, 8, 5);
        let err = nll_grad_check(&params, &batch).unwrap();
        assert!(err <= 1e-4, "max relative error {err}");
    }

    #[test]
    fn grad_check_gaussian() {
        let params = init_params(43, &small_gaussian());
        let batch = sample_batch(&params, 8, 6);
        let err = nll_grad_check(&params, &batch).unwrap();
        assert!(err <= 1e-4, "max relative error {err}");
    }

    /// At the exact optimum of a single-state softmax (logits matching the
    /// empirical frequencies), the NLL gradient on the head bias is zero.
    #[test]
    fn zero_gradient_at_softmax_optimum() {
        let arch = Arch {
            input_dim: 1,
            hidden: vec![],
            head: HeadKind::Discrete,
            action_dim: 2,
        };
        // single linear layer, zero weights; pick biases log([0.75, 0.25])
        let mut params = PolicyParams {
            arch: arch.clone(),
            data: vec![0.0; arch.param_count()],
        };
        params.data[2] = 0.75f64.ln();
        params.data[3] = 0.25f64.ln();
        let states = vec![vec![0.0]; 4];
        let actions = vec![
            Action::Discrete(0),
            Action::Discrete(0),
            Action::Discrete(0),
            Action::Discrete(1),
        ];
        let weights = vec![1.0; 4];
        let (_, grad) = weighted_nll_and_grad(&params, &states, &actions, &weights).unwrap();
        for g in grad {
            assert!(g.abs() < 1e-12, "gradient entry {g}");
        }
    }

    #[test]
    fn entropy_grad_matches_finite_differences() {
        let params = init_params(11, &small_discrete());
        let state = vec![0.3, -0.7, 0.5];
        let mut grad = vec![0.0; params.len()];
        entropy_and_grad(&params, &state, 1.0, &mut grad).unwrap();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus.data[i] += h;
            let mut minus = params.clone();
            minus.data[i] -= h;
            let mut tmp = vec![0.0; params.len()];
            let hp = entropy_and_grad(&plus, &state, 0.0, &mut tmp).unwrap();
            let hm = entropy_and_grad(&minus, &state, 0.0, &mut tmp).unwrap();
            let fd = (hp - hm) / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs()).max(1e-4);
            assert!(
                (grad[i] - fd).abs() / denom <= 1e-4,
                "entropy grad mismatch at {i}: {} vs {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn bc_overfits_single_pair() {
        let arch = small_discrete();
        let params = init_params(3, &arch);
        let batch = BcBatch {
            states: vec![vec![0.2, 0.4, -0.1]],
            actions: vec![Action::Discrete(2)],
        };
        let mut opt = AdamState::new(params.len());
        let mut p = params;
        for _ in 0..500 {
            let (next, _) = bc_update(&p, &batch, &mut opt, 1e-2).unwrap();
            p = next;
        }
        let d = forward(&p, &batch.states[0]).unwrap();
        let prob = match d {
            Distribution::Categorical(c) => c.probs()[2],
            _ => unreachable!(),
        };
        assert!(prob >= 0.99, "pi(a|s) = {prob}");
    }

    #[test]
    fn bc_loss_non_increasing_near_convergence() {
        let arch = small_discrete();
        let mut p = init_params(9, &arch);
        // batch of the policy's own argmax actions
        let key = StreamKey::new(17, Purpose::EnvNoise);
        let mut batch = BcBatch::default();
        for i in 0..16 {
            let s: Vec<f64> = (0..3)
                .map(|j| 2.0 * uniform64(key.with_counter((i * 4 + j) as u64)) - 1.0)
                .collect();
            let a = forward(&p, &s).unwrap().mode();
            batch.states.push(s);
            batch.actions.push(a);
        }
        let mut opt = AdamState::new(p.len());
        let mut losses = Vec::new();
        for _ in 0..10 {
            let (next, loss) = bc_update(&p, &batch, &mut opt, 1e-3).unwrap();
            losses.push(loss);
            p = next;
        }
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "loss increased: {:?}", losses);
        }
    }

    #[test]
    fn bc_is_bit_deterministic() {
        let arch = small_gaussian();
        let params = init_params(21, &arch);
        let batch = sample_batch(&params, 12, 22);
        let run = || {
            let mut opt = AdamState::new(params.len());
            let mut p = params.clone();
            for _ in 0..25 {
                let (next, _) = bc_update(&p, &batch, &mut opt, 3e-3).unwrap();
                p = next;
            }
            p
        };
        let a = run();
        let b = run();
        assert_eq!(a.data(), b.data());
        assert_eq!(param_digest(&a), param_digest(&b));
    }

    /// Minimizing empirical NLL on samples from a fixed target drives the
    /// KL from the target below 0.05 bits on a one-state problem.
    #[test]
    fn cross_entropy_consistency() {
        let arch = Arch {
            input_dim: 1,
            hidden: vec![8],
            head: HeadKind::Discrete,
            action_dim: 4,
        };
        let target: Distribution = Categorical::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap().into();
        let key = StreamKey::new(31, Purpose::ActionSample);
        let batch = BcBatch {
            states: vec![vec![1.0]; 2000],
            actions: (0..2000u64).map(|i| target.sample(key.with_counter(i))).collect(),
        };
        let mut p = init_params(32, &arch);
        let mut opt = AdamState::new(p.len());
        for _ in 0..2000 {
            let (next, _) = bc_update(&p, &batch, &mut opt, 1e-2).unwrap();
            p = next;
        }
        let learned = forward(&p, &[1.0]).unwrap();
        // compare against the empirical distribution of the batch, which is
        // what NLL minimization converges to
        let mut counts = [0.0; 4];
        for a in &batch.actions {
            counts[a.as_discrete().unwrap()] += 1.0;
        }
        let emp: Distribution =
            Categorical::new(counts.iter().map(|c| c / 2000.0).collect()).unwrap().into();
        let kl_emp = emp.kl(&learned).unwrap();
        assert!(kl_emp < 0.05, "kl(empirical, learned) = {kl_emp} bits");
        let kl_target = target.kl(&learned).unwrap();
        assert!(kl_target < 0.05, "kl(target, learned) = {kl_target} bits");
    }

    #[test]
    fn value_head_and_mse() {
        let arch = Arch::value(2);
        let mut p = init_params(55, &arch);
        let states = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let targets = vec![0.5, -0.5, 1.5];
        let mut opt = AdamState::new(p.len());
        for _ in 0..2000 {
            let (_, grad) = value_mse_and_grad(&p, &states, &targets).unwrap();
            opt.step(&mut p.data, &grad, 1e-2);
        }
        for (s, t) in states.iter().zip(&targets) {
            let v = forward_value(&p, s).unwrap();
            assert!((v - t).abs() < 1e-2, "value {v} vs target {t}");
        }
        assert!(forward(&p, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let params = init_params(77, &small_gaussian());
        let bytes = checkpoint_bytes(&params);
        let back = checkpoint_parse(&bytes).unwrap();
        assert_eq!(params, back);
        assert_eq!(param_digest(&params), param_digest(&back));

        let mut corrupted = bytes.clone();
        corrupted[0] = b'X';
        assert!(checkpoint_parse(&corrupted).is_err());
        assert!(checkpoint_parse(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn log_std_clamped_after_update() {
        let arch = small_gaussian();
        let mut params = init_params(88, &arch);
        let n = params.len();
        params.data[n - 1] = 50.0; // absurd log-std
        params.clamp_log_std();
        assert!(params.data[n - 1] <= STD_MAX.ln());
    }
}
