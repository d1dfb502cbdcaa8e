//! Wire messages and the framed byte transport encoding.
//!
//! Frame layout, bit-exact:
//!
//! ```text
//! [payload byte length: u32 LE][msg type: u8][actor id: u16 LE]
//! [step: u32 LE][payload bytes, bit-packed MSB-first, zero-padded]
//! ```
//!
//! The 11-byte header is transport overhead and excluded from the per-step
//! bit accounting (it is logged separately). Payloads are self-delimiting
//! (Elias-delta index) or fixed-width by scheme context, so no bit length
//! travels on the wire.
//!
//! Message types above 0x7f are transport-control frames used by the
//! threaded byte-stream runner for things the real deployment gets for
//! free from the environment (observations, executed actions, parameter
//! snapshots for instrumentation). They are never counted as protocol
//! communication.

use super::ProtocolError;

pub const FRAME_HEADER_BYTES: usize = 11;

/// Communication message types of the protocol proper.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    /// Remote-generation index (Elias-delta payload).
    OrcIndex = 0,
    /// Verbatim action (fixed width from the action space).
    AscAction = 1,
    /// Full or quantized reward (fixed width from the scheme).
    Reward = 2,
    /// Epoch boundary marker, empty payload.
    EpochMark = 3,
}

impl MessageKind {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(MessageKind::OrcIndex),
            1 => Some(MessageKind::AscAction),
            2 => Some(MessageKind::Reward),
            3 => Some(MessageKind::EpochMark),
            _ => None,
        }
    }
}

/// One controller-to-actor (or internal control) message.
#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub kind: MessageKind,
    pub actor_id: u16,
    pub step: u32,
    /// Bit-packed payload, MSB first, zero-padded to a byte boundary.
    pub payload: Vec<u8>,
    /// Exact payload length in bits (the accounted wire cost).
    pub payload_bits: usize,
}

impl WireMessage {
    pub fn new(
        kind: MessageKind,
        actor_id: u16,
        step: u32,
        payload: Vec<u8>,
        payload_bits: usize,
    ) -> Self {
        debug_assert!(payload_bits <= payload.len() * 8);
        WireMessage {
            kind,
            actor_id,
            step,
            payload,
            payload_bits,
        }
    }

    pub fn epoch_mark(actor_id: u16, step: u32) -> Self {
        WireMessage::new(MessageKind::EpochMark, actor_id, step, Vec::new(), 0)
    }
}

/// Encode a protocol message into a frame.
pub fn frame_encode(msg: &WireMessage) -> Vec<u8> {
    encode_raw(msg.kind as u8, msg.actor_id, msg.step, &msg.payload)
}

/// Decode one frame; returns the message and the bytes consumed.
/// `payload_bits` is reconstructed as the padded byte length; exact bit
/// counts are a property of the sender's accounting, not the wire.
pub fn frame_decode(bytes: &[u8]) -> Result<(WireMessage, usize), ProtocolError> {
    let (tag, actor_id, step, payload, consumed) = decode_raw(bytes)?;
    let kind = MessageKind::from_u8(tag)
        .ok_or_else(|| ProtocolError::BadFrame(format!("unknown msg_type {tag}")))?;
    let bits = payload.len() * 8;
    Ok((
        WireMessage::new(kind, actor_id, step, payload, bits),
        consumed,
    ))
}

/// Transport-control frame tags (not protocol communication).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ControlKind {
    /// Observation + episode bookkeeping toward an actor.
    Obs = 0x80,
    /// Executed action back from an actor.
    ActionReturn = 0x81,
    /// Serialized parameter snapshot (instrumentation).
    ParamSnapshot = 0x82,
    /// Orderly shutdown.
    Shutdown = 0x83,
}

impl ControlKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0x80 => Some(ControlKind::Obs),
            0x81 => Some(ControlKind::ActionReturn),
            0x82 => Some(ControlKind::ParamSnapshot),
            0x83 => Some(ControlKind::Shutdown),
            _ => None,
        }
    }
}

/// Either side of the framed stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Message(WireMessage),
    Control {
        kind: ControlKind,
        actor_id: u16,
        step: u32,
        payload: Vec<u8>,
    },
}

pub fn control_encode(kind: ControlKind, actor_id: u16, step: u32, payload: &[u8]) -> Vec<u8> {
    encode_raw(kind as u8, actor_id, step, payload)
}

/// Decode either a protocol or a control frame.
pub fn any_frame_decode(bytes: &[u8]) -> Result<(Frame, usize), ProtocolError> {
    let (tag, actor_id, step, payload, consumed) = decode_raw(bytes)?;
    if tag < 0x80 {
        let kind = MessageKind::from_u8(tag)
            .ok_or_else(|| ProtocolError::BadFrame(format!("unknown msg_type {tag}")))?;
        let bits = payload.len() * 8;
        Ok((
            Frame::Message(WireMessage::new(kind, actor_id, step, payload, bits)),
            consumed,
        ))
    } else {
        let kind = ControlKind::from_u8(tag)
            .ok_or_else(|| ProtocolError::BadFrame(format!("unknown control tag {tag}")))?;
        Ok((
            Frame::Control {
                kind,
                actor_id,
                step,
                payload,
            },
            consumed,
        ))
    }
}

fn encode_raw(tag: u8, actor_id: u16, step: u32, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_BYTES + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.push(tag);
    out.extend_from_slice(&actor_id.to_le_bytes());
    out.extend_from_slice(&step.to_le_bytes());
    out.extend_from_slice(payload);
    out
}

#[allow(clippy::type_complexity)]
fn decode_raw(bytes: &[u8]) -> Result<(u8, u16, u32, Vec<u8>, usize), ProtocolError> {
    if bytes.len() < FRAME_HEADER_BYTES {
        return Err(ProtocolError::BadFrame(format!(
            "truncated header: {} bytes",
            bytes.len()
        )));
    }
    let len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let tag = bytes[4];
    let actor_id = u16::from_le_bytes(bytes[5..7].try_into().unwrap());
    let step = u32::from_le_bytes(bytes[7..11].try_into().unwrap());
    let total = FRAME_HEADER_BYTES + len;
    if bytes.len() < total {
        return Err(ProtocolError::BadFrame(format!(
            "truncated payload: have {}, frame needs {total}",
            bytes.len()
        )));
    }
    Ok((
        tag,
        actor_id,
        step,
        bytes[FRAME_HEADER_BYTES..total].to_vec(),
        total,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orc_index_one_frame_is_twelve_bytes() {
        let (payload, bits) = crate::codec::index_wire_encode(1).unwrap();
        let msg = WireMessage::new(MessageKind::OrcIndex, 0, 7, payload, bits);
        assert_eq!(msg.payload_bits, 1);
        let frame = frame_encode(&msg);
        assert_eq!(frame.len(), 12);
        let (back, consumed) = frame_decode(&frame).unwrap();
        assert_eq!(consumed, 12);
        assert_eq!(back.kind, MessageKind::OrcIndex);
        assert_eq!(back.step, 7);
        assert_eq!(back.payload, msg.payload);
    }

    #[test]
    fn reward_frame_payload_is_four_bytes() {
        let (payload, bits) =
            crate::codec::reward_encode(0.25, crate::codec::RewardScheme::Fr, (0.0, 1.0)).unwrap();
        let msg = WireMessage::new(MessageKind::Reward, 2, 99, payload, bits);
        let frame = frame_encode(&msg);
        assert_eq!(frame.len(), FRAME_HEADER_BYTES + 4);
        let (back, _) = frame_decode(&frame).unwrap();
        assert_eq!(back.actor_id, 2);
        assert_eq!(back.payload.len(), 4);
    }

    #[test]
    fn round_trip_randomized() {
        for i in 0..200u32 {
            let kind = match i % 4 {
                0 => MessageKind::OrcIndex,
                1 => MessageKind::AscAction,
                2 => MessageKind::Reward,
                _ => MessageKind::EpochMark,
            };
            let payload: Vec<u8> = (0..(i % 9) as u8).collect();
            let bits = payload.len() * 8;
            let msg = WireMessage::new(kind, (i % 7) as u16, i, payload, bits);
            let frame = frame_encode(&msg);
            let (back, consumed) = frame_decode(&frame).unwrap();
            assert_eq!(consumed, frame.len());
            assert_eq!(back.kind, msg.kind);
            assert_eq!(back.actor_id, msg.actor_id);
            assert_eq!(back.step, msg.step);
            assert_eq!(back.payload, msg.payload);
        }
    }

    #[test]
    fn truncated_and_unknown_frames_error() {
        let msg = WireMessage::epoch_mark(0, 1);
        let frame = frame_encode(&msg);
        assert!(frame_decode(&frame[..frame.len() - 1]).is_err() || frame.len() == 11);
        assert!(frame_decode(&frame[..5]).is_err());
        let mut bad = frame.clone();
        bad[4] = 0x55;
        assert!(frame_decode(&bad).is_err());
    }

    #[test]
    fn control_frames_round_trip() {
        let frame = control_encode(ControlKind::Obs, 1, 42, &[1, 2, 3]);
        match any_frame_decode(&frame).unwrap() {
            (
                Frame::Control {
                    kind,
                    actor_id,
                    step,
                    payload,
                },
                consumed,
            ) => {
                assert_eq!(kind, ControlKind::Obs);
                assert_eq!(actor_id, 1);
                assert_eq!(step, 42);
                assert_eq!(payload, vec![1, 2, 3]);
                assert_eq!(consumed, frame.len());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
