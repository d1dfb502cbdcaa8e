//! Remote generation and the baseline encoders.
//!
//! The centerpiece is ordered random coding: the encoder knows the target
//! distribution `P` and the proposal `Q`, runs an exponential race over
//! candidates drawn from `Q`, and transmits only the index of the winning
//! candidate. The decoder, knowing `Q` and the shared key schedule,
//! regenerates that single candidate in O(1). On top of that sit the cost
//! models (a truncated Zipf prior for ideal bits, Elias-delta for wire
//! bits) and the baselines: verbatim action transmission and full /
//! quantized reward transmission.

use crate::bits::{delta_decode, delta_encode, delta_len, BitReader, BitWriter, BitsError};
use crate::dist::{Action, DistError, Distribution};
use crate::prng::{exp1, Purpose, StreamKey};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("candidate list size must be a power of two >= 2, got {0}")]
    BadListSize(u32),
    #[error("index prior exponent must be > 1, got {0}")]
    BadExponent(f64),
    #[error("index {0} out of range 1..={1}")]
    IndexOutOfRange(u64, u32),
    #[error("quantizer range invalid: [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("reward is NaN")]
    NanReward,
    #[error("action does not fit the declared action space")]
    ActionSpaceMismatch,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Bits(#[from] BitsError),
}

/// Index plus both accounting views of its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMessage {
    /// Winning candidate index, 1-based.
    pub index: u64,
    /// Cost in bits under the configured index prior.
    pub ideal_bits: f64,
    /// Length of the self-delimiting Elias-delta code for the index.
    pub wire_bits: usize,
}

/// Ordered-random-coding configuration.
///
/// `ideal_bits` accounting uses the truncated Zipf prior
/// `p(n) = n^-alpha / Z_N`; the default exponent `1 + 1/N` is the
/// convention of the minimal-random-coding literature, and both accounting
/// views are always logged so results stay auditable under either.
#[derive(Debug, Clone, PartialEq)]
pub struct OrcConfig {
    n: u32,
    zipf_alpha: f64,
    log2_z: f64,
}

impl OrcConfig {
    pub fn new(n: u32, zipf_alpha: f64) -> Result<Self, CodecError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(CodecError::BadListSize(n));
        }
        if !(zipf_alpha > 1.0) || !zipf_alpha.is_finite() {
            return Err(CodecError::BadExponent(zipf_alpha));
        }
        let z: f64 = (1..=n as u64).map(|m| (m as f64).powf(-zipf_alpha)).sum();
        Ok(OrcConfig {
            n,
            zipf_alpha,
            log2_z: z.log2(),
        })
    }

    /// `N` candidates with the literature-default exponent `1 + 1/N`.
    pub fn with_list_size(n: u32) -> Result<Self, CodecError> {
        Self::new(n, 1.0 + 1.0 / n as f64)
    }

    pub fn list_size(&self) -> u32 {
        self.n
    }

    pub fn zipf_alpha(&self) -> f64 {
        self.zipf_alpha
    }
}

impl Default for OrcConfig {
    fn default() -> Self {
        OrcConfig::with_list_size(256).expect("default config is valid")
    }
}

/// Cost in bits of transmitting index `n` under the truncated Zipf prior.
pub fn index_ideal_bits(n: u64, cfg: &OrcConfig) -> Result<f64, CodecError> {
    if n < 1 || n > cfg.n as u64 {
        return Err(CodecError::IndexOutOfRange(n, cfg.n));
    }
    Ok(cfg.log2_z + cfg.zipf_alpha * (n as f64).log2())
}

/// Smallest density ratio `Q(x)/P(x)` over the support, in log2. This is
/// the early-exit threshold of the race; it is `-inf` for Gaussians, whose
/// ratio infimum over unbounded support is zero.
fn log2_w_min(p: &Distribution, q: &Distribution) -> Result<f64, CodecError> {
    match (p, q) {
        (Distribution::Categorical(pc), Distribution::Categorical(qc)) => {
            if pc.len() != qc.len() {
                return Err(DistError::DimMismatch(pc.len(), qc.len()).into());
            }
            Ok(pc
                .probs()
                .iter()
                .zip(qc.probs())
                .map(|(pi, qi)| qi.log2() - pi.log2())
                .fold(f64::INFINITY, f64::min))
        }
        (Distribution::DiagGaussian(pg), Distribution::DiagGaussian(qg)) => {
            if pg.dim() != qg.dim() {
                return Err(DistError::DimMismatch(pg.dim(), qg.dim()).into());
            }
            Ok(f64::NEG_INFINITY)
        }
        _ => Err(DistError::FamilyMismatch.into()),
    }
}

/// Encode one sample of `P` against the shared proposal `Q`.
///
/// Runs the exponential race: candidate `n` is `sample(Q)` at
/// `purpose = Candidate, counter = n`; the race time advances by
/// `N/(N-n+1) * Exp(1)` with the exponential drawn at
/// `purpose = Exponential, counter = n`; the score `t * Q(z)/P(z)` is
/// tracked in log space and the race stops once the running minimum can no
/// longer be beaten (`s* <= t * w_min`) or the list is exhausted.
///
/// The returned action is exactly what [`orc_decode`] yields for the
/// returned message under the same key and `Q`. The caller's `purpose` and
/// `counter` fields are ignored; the codec owns them.
pub fn orc_encode(
    p: &Distribution,
    q: &Distribution,
    cfg: &OrcConfig,
    key: StreamKey,
) -> Result<(Action, EncodedMessage), CodecError> {
    let log2_wmin = log2_w_min(p, q)?;
    let cand_key = key.with_purpose(Purpose::Candidate);
    let exp_key = key.with_purpose(Purpose::Exponential);
    let n_max = cfg.n as u64;

    let mut t = 0.0_f64;
    let mut best_log2_s = f64::INFINITY;
    let mut best_index = 1;
    let mut best_action: Option<Action> = None;
    for n in 1..=n_max {
        let z = q.sample(cand_key.with_counter(n));
        let v = n_max as f64 / (n_max - n + 1) as f64;
        t += v * exp1(exp_key.with_counter(n));
        let log2_s = t.log2() + q.log_prob(&z)? - p.log_prob(&z)?;
        if log2_s < best_log2_s {
            best_log2_s = log2_s;
            best_index = n;
            best_action = Some(z);
        }
        if best_log2_s <= t.log2() + log2_wmin {
            break;
        }
    }
    let action = best_action.expect("list size >= 2 guarantees at least one candidate");
    let msg = EncodedMessage {
        index: best_index,
        ideal_bits: index_ideal_bits(best_index, cfg)?,
        wire_bits: delta_len(best_index),
    };
    Ok((action, msg))
}

/// Regenerate the winning candidate from the transmitted index. O(1) in the
/// list size; never sees `P`.
pub fn orc_decode(msg: &EncodedMessage, q: &Distribution, key: StreamKey) -> Action {
    q.sample(
        key.with_purpose(Purpose::Candidate)
            .with_counter(msg.index),
    )
}

/// Elias-delta transport of an index.
pub fn index_wire_encode(n: u64) -> Result<(Vec<u8>, usize), CodecError> {
    let mut w = BitWriter::new();
    delta_encode(&mut w, n)?;
    Ok(w.finish())
}

pub fn index_wire_decode(bytes: &[u8], bit_len: usize) -> Result<u64, CodecError> {
    let mut r = BitReader::new(bytes, bit_len);
    Ok(delta_decode(&mut r)?)
}

/// Action space of an environment, as seen by the encoders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous { dim: usize },
}

/// Cost per step of sending the sampled action verbatim:
/// `ceil(log2 |A|)` bits for discrete spaces, 32 bits per dimension for
/// continuous ones.
pub fn asc_bits(space: &ActionSpace) -> u32 {
    match space {
        ActionSpace::Discrete(n) => (*n as f64).log2().ceil() as u32,
        ActionSpace::Continuous { dim } => 32 * *dim as u32,
    }
}

/// Fixed-length verbatim action payload (big-endian index, or IEEE binary32
/// bit patterns per dimension, MSB first).
pub fn asc_encode(action: &Action, space: &ActionSpace) -> Result<(Vec<u8>, usize), CodecError> {
    let mut w = BitWriter::new();
    match (action, space) {
        (Action::Discrete(a), ActionSpace::Discrete(n)) => {
            if a >= n {
                return Err(CodecError::ActionSpaceMismatch);
            }
            w.push_bits(*a as u64, asc_bits(space));
        }
        (Action::Continuous(x), ActionSpace::Continuous { dim }) => {
            if x.len() != *dim {
                return Err(CodecError::ActionSpaceMismatch);
            }
            for &xi in x {
                w.push_bits((xi as f32).to_bits() as u64, 32);
            }
        }
        _ => return Err(CodecError::ActionSpaceMismatch),
    }
    Ok(w.finish())
}

pub fn asc_decode(bytes: &[u8], bit_len: usize, space: &ActionSpace) -> Result<Action, CodecError> {
    let mut r = BitReader::new(bytes, bit_len);
    match space {
        ActionSpace::Discrete(_) => {
            let a = r.read_bits(asc_bits(space))? as usize;
            Ok(Action::Discrete(a))
        }
        ActionSpace::Continuous { dim } => {
            let mut x = Vec::with_capacity(*dim);
            for _ in 0..*dim {
                x.push(f32::from_bits(r.read_bits(32)? as u32) as f64);
            }
            Ok(Action::Continuous(x))
        }
    }
}

/// Reward transmission schemes: full binary32, binary16, or `k`-bit uniform
/// mid-rise quantization over a configured range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardScheme {
    Fr,
    Qr16,
    Qr8,
    Qr4,
}

impl RewardScheme {
    pub fn bits(self) -> u32 {
        match self {
            RewardScheme::Fr => 32,
            RewardScheme::Qr16 => 16,
            RewardScheme::Qr8 => 8,
            RewardScheme::Qr4 => 4,
        }
    }
}

fn quantizer_step(scheme: RewardScheme, range: (f64, f64)) -> Result<f64, CodecError> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CodecError::BadRange(lo, hi));
    }
    Ok((hi - lo) / (1u64 << scheme.bits()) as f64)
}

/// Encode a reward. `range` is only consulted by the QR8/QR4 quantizers.
pub fn reward_encode(
    r: f64,
    scheme: RewardScheme,
    range: (f64, f64),
) -> Result<(Vec<u8>, usize), CodecError> {
    if r.is_nan() {
        return Err(CodecError::NanReward);
    }
    let mut w = BitWriter::new();
    match scheme {
        RewardScheme::Fr => w.push_bits((r as f32).to_bits() as u64, 32),
        RewardScheme::Qr16 => w.push_bits(f32_to_f16_bits(r as f32) as u64, 16),
        RewardScheme::Qr8 | RewardScheme::Qr4 => {
            let step = quantizer_step(scheme, range)?;
            let levels = 1u64 << scheme.bits();
            let idx = (((r - range.0) / step).floor() as i64).clamp(0, levels as i64 - 1) as u64;
            w.push_bits(idx, scheme.bits());
        }
    }
    Ok(w.finish())
}

pub fn reward_decode(
    bytes: &[u8],
    bit_len: usize,
    scheme: RewardScheme,
    range: (f64, f64),
) -> Result<f64, CodecError> {
    let mut r = BitReader::new(bytes, bit_len);
    match scheme {
        RewardScheme::Fr => Ok(f32::from_bits(r.read_bits(32)? as u32) as f64),
        RewardScheme::Qr16 => Ok(f16_bits_to_f32(r.read_bits(16)? as u16) as f64),
        RewardScheme::Qr8 | RewardScheme::Qr4 => {
            let step = quantizer_step(scheme, range)?;
            let idx = r.read_bits(scheme.bits())?;
            Ok(range.0 + (idx as f64 + 0.5) * step)
        }
    }
}

/// IEEE-754 binary32 -> binary16 with round-to-nearest-even.
pub fn f32_to_f16_bits(x: f32) -> u16 {
    let b = x.to_bits();
    let sign = ((b >> 16) & 0x8000) as u16;
    let exp = ((b >> 23) & 0xff) as i32;
    let mant = b & 0x007f_ffff;

    if exp == 0xff {
        // inf or nan; keep nan payload non-zero
        let payload = if mant == 0 { 0 } else { (mant >> 13) as u16 | 0x200 };
        return sign | 0x7c00 | payload;
    }
    if exp >= 143 {
        // magnitude >= 2^16 rounds to infinity
        return sign | 0x7c00;
    }
    if exp >= 113 {
        // normal range: drop 13 mantissa bits with RNE; carries propagate
        // into the exponent field arithmetically
        let mut v = (((exp - 112) as u16) << 10) | (mant >> 13) as u16;
        let rem = mant & 0x1fff;
        if rem > 0x1000 || (rem == 0x1000 && v & 1 == 1) {
            v += 1;
        }
        return sign | v;
    }
    if exp >= 102 {
        // subnormal: significand with implicit one, shifted by 126 - exp
        let m = mant | 0x0080_0000;
        let shift = 126 - exp;
        let q = (m >> shift) as u16;
        let rem = m & ((1 << shift) - 1);
        let half = 1u32 << (shift - 1);
        let mut v = q;
        if rem > half || (rem == half && q & 1 == 1) {
            v += 1;
        }
        return sign | v;
    }
    // underflow to signed zero
    sign
}

/// IEEE-754 binary16 -> binary32 (exact).
pub fn f16_bits_to_f32(h: u16) -> f32 {
    let sign = ((h as u32) & 0x8000) << 16;
    let exp = (h >> 10) & 0x1f;
    let mant = (h & 0x3ff) as u32;
    match exp {
        0 => {
            if mant == 0 {
                f32::from_bits(sign)
            } else {
                let v = mant as f32 * (-24f32).exp2();
                if sign != 0 {
                    -v
                } else {
                    v
                }
            }
        }
        0x1f => {
            if mant == 0 {
                f32::from_bits(sign | 0x7f80_0000)
            } else {
                f32::from_bits(sign | 0x7f80_0000 | (mant << 13))
            }
        }
        _ => f32::from_bits(sign | ((exp as u32 + 112) << 23) | (mant << 13)),
    }
}
