//! Event envelopes and their length-prefixed wire frames.

use thiserror::Error;

use crate::value::{encode_into, CodecError, Reader, Value};

/// Largest frame, length prefix included.
pub const MAX_ENVELOPE_BYTES: usize = 10_240;

/// Frame bytes around the topic and payload: length prefix, topic length,
/// sender, seq and timestamp.
pub const FRAME_OVERHEAD: usize = 4 + 2 + 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: String,
    pub sender: u32,
    pub seq: u64,
    pub timestamp: f64,
    pub payload: Value,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvelopeError {
    #[error("frame of {0} bytes exceeds the {MAX_ENVELOPE_BYTES}-byte cap")]
    PayloadTooLarge(usize),
    #[error("invalid topic {0:?}")]
    InvalidTopic(String),
    #[error("frame length prefix says {declared} bytes but {actual} follow")]
    LengthMismatch { declared: usize, actual: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Non-empty printable ASCII with no spaces.
pub fn is_valid_topic(topic: &str) -> bool {
    !topic.is_empty() && topic.len() <= u16::MAX as usize && topic.bytes().all(|b| b.is_ascii_graphic())
}

/// Complete frame: `u32` length of the rest, topic, sender, seq, timestamp
/// and payload, all little-endian.
pub fn encode_envelope(env: &Envelope) -> Result<Vec<u8>, EnvelopeError> {
    if !is_valid_topic(&env.topic) {
        return Err(EnvelopeError::InvalidTopic(env.topic.clone()));
    }
    let mut out = Vec::with_capacity(FRAME_OVERHEAD + env.topic.len() + 16);
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&(env.topic.len() as u16).to_le_bytes());
    out.extend_from_slice(env.topic.as_bytes());
    out.extend_from_slice(&env.sender.to_le_bytes());
    out.extend_from_slice(&env.seq.to_le_bytes());
    out.extend_from_slice(&env.timestamp.to_le_bytes());
    encode_into(&env.payload, &mut out)?;
    if out.len() > MAX_ENVELOPE_BYTES {
        return Err(EnvelopeError::PayloadTooLarge(out.len()));
    }
    let body = (out.len() - 4) as u32;
    out[..4].copy_from_slice(&body.to_le_bytes());
    Ok(out)
}

/// Decodes the bytes after the length prefix.
pub fn decode_envelope_body(body: &[u8]) -> Result<Envelope, EnvelopeError> {
    if body.len() + 4 > MAX_ENVELOPE_BYTES {
        return Err(EnvelopeError::PayloadTooLarge(body.len() + 4));
    }
    let mut r = Reader { bytes: body, at: 0 };
    let topic_len = u16::from_le_bytes(r.array()?) as usize;
    let topic = String::from_utf8_lossy(r.take(topic_len)?).into_owned();
    if !is_valid_topic(&topic) {
        return Err(EnvelopeError::InvalidTopic(topic));
    }
    let sender = u32::from_le_bytes(r.array()?);
    let seq = u64::from_le_bytes(r.array()?);
    let timestamp = f64::from_le_bytes(r.array()?);
    let payload = r.value(1)?;
    if r.at != body.len() {
        return Err(CodecError::TrailingBytes(body.len() - r.at).into());
    }
    Ok(Envelope {
        topic,
        sender,
        seq,
        timestamp,
        payload,
    })
}

/// Decodes a whole frame, length prefix included.
pub fn decode_envelope(frame: &[u8]) -> Result<Envelope, EnvelopeError> {
    let mut r = Reader { bytes: frame, at: 0 };
    let declared = r.u32()? as usize;
    let actual = frame.len() - 4;
    if declared != actual {
        return Err(EnvelopeError::LengthMismatch { declared, actual });
    }
    decode_envelope_body(&frame[4..])
}
