//! Live device stream datagrams.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "AKN1"
//! 4       1     version (1)
//! 5       8     stream id, ASCII, space padded
//! 13      2     joint count (u16 LE, <= 32)
//! 15      8     sequence (u64 LE)
//! 23      8     timestamp seconds (f64 LE)
//! 31      12    root translation, 3 x f32 LE
//! 43      16n   rotations, x y z w as 4 x f32 LE
//! ```

use nalgebra::{Quaternion, Unit};
use thiserror::Error;

use crate::math::{Quat, Vec3, UNIT_NORM_TOLERANCE};

/// The ASCII bytes of `0x414B4E31`.
pub const DEVICE_MAGIC: [u8; 4] = *b"AKN1";
pub const DEVICE_VERSION: u8 = 1;
pub const STREAM_ID_LEN: usize = 8;
pub const DEVICE_HEADER_LEN: usize = 43;
pub const MAX_DEVICE_JOINTS: usize = 32;
pub const MAX_DEVICE_FRAME_LEN: usize = DEVICE_HEADER_LEN + MAX_DEVICE_JOINTS * 16;

/// Rotations further than this from unit norm are rejected.
const RENORMALIZE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceFrame {
    /// Stream id with the padding stripped.
    pub stream_id: String,
    pub local_rotations: Vec<Quat>,
    pub root_translation: Vec3,
    pub sequence: u64,
    pub timestamp: f64,
}

impl DeviceFrame {
    pub fn joint_count(&self) -> usize {
        self.local_rotations.len()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DeviceFrameError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated frame: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("{0} trailing bytes after the declared payload")]
    TrailingBytes(usize),
    #[error("joint count {0} exceeds the limit of {MAX_DEVICE_JOINTS}")]
    TooManyJoints(usize),
    #[error("rotation {joint} has norm {norm}, too far from unit")]
    NonUnitQuaternion { joint: usize, norm: f64 },
    #[error("non-finite value in frame header")]
    NonFinite,
    #[error("stream id must be 1 to 8 printable ASCII characters, got {0:?}")]
    InvalidStreamId(String),
}

fn f32_at(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_device_frame(bytes: &[u8]) -> Result<DeviceFrame, DeviceFrameError> {
    if bytes.len() < 4 {
        return Err(DeviceFrameError::Truncated {
            needed: DEVICE_HEADER_LEN,
            got: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != DEVICE_MAGIC {
        return Err(DeviceFrameError::BadMagic(magic));
    }
    if bytes.len() < DEVICE_HEADER_LEN {
        return Err(DeviceFrameError::Truncated {
            needed: DEVICE_HEADER_LEN,
            got: bytes.len(),
        });
    }
    if bytes[4] != DEVICE_VERSION {
        return Err(DeviceFrameError::UnsupportedVersion(bytes[4]));
    }
    let raw_id = &bytes[5..5 + STREAM_ID_LEN];
    if !raw_id.iter().all(|b| b.is_ascii_graphic() || *b == b' ') {
        return Err(DeviceFrameError::InvalidStreamId(
            String::from_utf8_lossy(raw_id).into_owned(),
        ));
    }
    let stream_id = std::str::from_utf8(raw_id).unwrap().trim_end_matches(' ').to_string();

    let joint_count = u16::from_le_bytes([bytes[13], bytes[14]]) as usize;
    if joint_count > MAX_DEVICE_JOINTS {
        return Err(DeviceFrameError::TooManyJoints(joint_count));
    }
    let needed = DEVICE_HEADER_LEN + joint_count * 16;
    if bytes.len() < needed {
        return Err(DeviceFrameError::Truncated {
            needed,
            got: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(DeviceFrameError::TrailingBytes(bytes.len() - needed));
    }

    let sequence = u64::from_le_bytes(bytes[15..23].try_into().unwrap());
    let timestamp = f64::from_le_bytes(bytes[23..31].try_into().unwrap());
    let root_translation = Vec3::new(
        f32_at(bytes, 31) as f64,
        f32_at(bytes, 35) as f64,
        f32_at(bytes, 39) as f64,
    );
    if !timestamp.is_finite() || !root_translation.iter().all(|v| v.is_finite()) {
        return Err(DeviceFrameError::NonFinite);
    }

    let mut local_rotations = Vec::with_capacity(joint_count);
    for joint in 0..joint_count {
        let at = DEVICE_HEADER_LEN + joint * 16;
        let [x, y, z, w] = [0, 4, 8, 12].map(|o| f32_at(bytes, at + o) as f64);
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(DeviceFrameError::NonUnitQuaternion { joint, norm });
        }
        let q = if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            // keep the stored value representable on the wire so that
            // re-encoding a decoded frame is lossless
            let n = q / norm;
            Quaternion::new(
                n.w as f32 as f64,
                n.i as f32 as f64,
                n.j as f32 as f64,
                n.k as f32 as f64,
            )
        } else {
            q
        };
        local_rotations.push(Unit::new_unchecked(q));
    }

    Ok(DeviceFrame {
        stream_id,
        local_rotations,
        root_translation,
        sequence,
        timestamp,
    })
}

/// Serializes a frame. Values are narrowed to `f32` on the wire.
pub fn encode_device_frame(frame: &DeviceFrame) -> Result<Vec<u8>, DeviceFrameError> {
    let id = frame.stream_id.as_bytes();
    if id.is_empty() || id.len() > STREAM_ID_LEN || !id.iter().all(|b| b.is_ascii_graphic()) {
        return Err(DeviceFrameError::InvalidStreamId(frame.stream_id.clone()));
    }
    let n = frame.joint_count();
    if n > MAX_DEVICE_JOINTS {
        return Err(DeviceFrameError::TooManyJoints(n));
    }
    let mut out = Vec::with_capacity(DEVICE_HEADER_LEN + n * 16);
    out.extend_from_slice(&DEVICE_MAGIC);
    out.push(DEVICE_VERSION);
    let mut padded = [b' '; STREAM_ID_LEN];
    padded[..id.len()].copy_from_slice(id);
    out.extend_from_slice(&padded);
    out.extend_from_slice(&(n as u16).to_le_bytes());
    out.extend_from_slice(&frame.sequence.to_le_bytes());
    out.extend_from_slice(&frame.timestamp.to_le_bytes());
    for v in frame.root_translation.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    for q in &frame.local_rotations {
        let c = q.as_ref();
        for v in [c.i, c.j, c.k, c.w] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(n: usize) -> DeviceFrame {
        DeviceFrame {
            stream_id: "NEURON1".into(),
            local_rotations: vec![Quat::identity(); n],
            root_translation: Vec3::new(0.5, 1.0, -0.25),
            sequence: 7,
            timestamp: 1.25,
        }
    }

    #[test]
    fn identity_rotations_decode() {
        let bytes = encode_device_frame(&frame(2)).unwrap();
        assert_eq!(bytes.len(), DEVICE_HEADER_LEN + 32);
        let f = decode_device_frame(&bytes).unwrap();
        assert_eq!(f.joint_count(), 2);
        assert!(f.local_rotations.iter().all(|q| *q == Quat::identity()));
        assert_eq!(f, frame(2));
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = encode_device_frame(&frame(1)).unwrap();
        assert_eq!(&bytes[0..4], b"AKN1");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..13], b"NEURON1 ");
        assert_eq!(&bytes[13..15], &[1, 0]);
        assert_eq!(&bytes[15..23], &7u64.to_le_bytes());
        assert_eq!(&bytes[23..31], &1.25f64.to_le_bytes());
        assert_eq!(&bytes[31..35], &0.5f32.to_le_bytes());
        // identity: x y z = 0, w = 1
        assert_eq!(&bytes[43..55], &[0u8; 12]);
        assert_eq!(&bytes[55..59], &1f32.to_le_bytes());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_device_frame(&frame(1)).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            decode_device_frame(&bytes),
            Err(DeviceFrameError::BadMagic(_))
        ));
    }

    #[test]
    fn truncated_payload() {
        let bytes = encode_device_frame(&frame(3)).unwrap();
        let cut = &bytes[..bytes.len() - 5];
        assert_eq!(
            decode_device_frame(cut),
            Err(DeviceFrameError::Truncated {
                needed: DEVICE_HEADER_LEN + 48,
                got: DEVICE_HEADER_LEN + 43
            })
        );
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(decode_device_frame(&extra), Err(DeviceFrameError::TrailingBytes(1)));
    }

    #[test]
    fn joint_limit() {
        let bytes = encode_device_frame(&frame(32)).unwrap();
        assert_eq!(bytes.len(), MAX_DEVICE_FRAME_LEN);
        assert_eq!(MAX_DEVICE_FRAME_LEN, 555);
        assert!(decode_device_frame(&bytes).is_ok());

        let mut over = bytes.clone();
        over[13..15].copy_from_slice(&33u16.to_le_bytes());
        over.extend_from_slice(&bytes[43..59]);
        assert_eq!(decode_device_frame(&over), Err(DeviceFrameError::TooManyJoints(33)));
        assert_eq!(
            encode_device_frame(&frame(33)),
            Err(DeviceFrameError::TooManyJoints(33))
        );
    }

    #[test]
    fn near_unit_rotations_are_renormalized() {
        let mut bytes = encode_device_frame(&frame(1)).unwrap();
        bytes[55..59].copy_from_slice(&1.0005f32.to_le_bytes());
        let f = decode_device_frame(&bytes).unwrap();
        assert!((f.local_rotations[0].as_ref().norm() - 1.0).abs() < 1e-6);

        bytes[55..59].copy_from_slice(&1.01f32.to_le_bytes());
        assert!(matches!(
            decode_device_frame(&bytes),
            Err(DeviceFrameError::NonUnitQuaternion { joint: 0, .. })
        ));
    }

    prop_compose! {
        fn wire_quat()(v in prop::array::uniform4(-1.0f32..1.0f32)) -> [f32; 4] {
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            if n < 1e-2 { [0.0, 0.0, 0.0, 1.0] } else { v.map(|x| x / n) }
        }
    }

    proptest! {
        #[test]
        fn decoded_frames_round_trip(
            quats in prop::collection::vec(wire_quat(), 0..=32),
            root in prop::array::uniform3(-100.0f32..100.0f32),
            sequence in any::<u64>(),
            timestamp in -1e6f64..1e6,
            id in "[A-Z0-9]{1,8}",
        ) {
            let mut bytes = Vec::new();
            bytes.extend_from_slice(b"AKN1");
            bytes.push(1);
            let mut padded = [b' '; 8];
            padded[..id.len()].copy_from_slice(id.as_bytes());
            bytes.extend_from_slice(&padded);
            bytes.extend_from_slice(&(quats.len() as u16).to_le_bytes());
            bytes.extend_from_slice(&sequence.to_le_bytes());
            bytes.extend_from_slice(&timestamp.to_le_bytes());
            for v in root { bytes.extend_from_slice(&v.to_le_bytes()); }
            for q in &quats { for v in q { bytes.extend_from_slice(&v.to_le_bytes()); } }

            let frame = decode_device_frame(&bytes).unwrap();
            let again = decode_device_frame(&encode_device_frame(&frame).unwrap()).unwrap();
            prop_assert_eq!(&again, &frame);
            prop_assert!(frame.local_rotations.iter().all(|q| (q.as_ref().norm() - 1.0).abs() <= 1e-6));
        }
    }
}
