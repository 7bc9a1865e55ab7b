//! Everything that produces device-skeleton poses: live stream frames, BVH
//! replay clips and the smoothing filter.

mod bvh;
mod device;
mod mailbox;
mod smooth;
mod suit;

pub use bvh::{parse_bvh, quat_to_zxy_degrees, write_bvh, BvhError, BvhErrorKind};
pub use device::{
    decode_device_frame, encode_device_frame, DeviceFrame, DeviceFrameError, DEVICE_HEADER_LEN, DEVICE_MAGIC,
    DEVICE_VERSION, MAX_DEVICE_FRAME_LEN, MAX_DEVICE_JOINTS, STREAM_ID_LEN,
};
pub use mailbox::{FrameMailbox, MailboxStats};
pub use smooth::{smooth, SmoothError, SmootherState, DEFAULT_SMOOTH_ALPHA};
pub use suit::{suit_skeleton, SUIT_JOINTS};

use thiserror::Error;

use crate::math::{lerp3, quat_slerp};
use crate::skeleton::{Pose, Skeleton};

#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub skeleton: Skeleton,
    pub frames: Vec<Pose>,
    /// Seconds between frames.
    pub frame_time: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ClipError {
    #[error("clip has no frames")]
    Empty,
    #[error("sample time must be a non-negative number, got {0}")]
    NegativeTime(f64),
}

impl MotionClip {
    pub fn duration(&self) -> f64 {
        self.frames.len().saturating_sub(1) as f64 * self.frame_time
    }
}

/// Pose at `t` seconds, interpolating between the bracketing frames and
/// holding the last frame past the end.
pub fn sample_clip(clip: &MotionClip, t: f64) -> Result<Pose, ClipError> {
    if clip.frames.is_empty() {
        return Err(ClipError::Empty);
    }
    if !(t >= 0.0) {
        return Err(ClipError::NegativeTime(t));
    }
    let last = clip.frames.len() - 1;
    let u = t / clip.frame_time;
    let nearest = u.round();
    // landing on a frame boundary returns that frame untouched
    let (k, frac) = if (u - nearest).abs() < 1e-9 {
        (nearest, 0.0)
    } else {
        (u.floor(), u - u.floor())
    };
    if k >= last as f64 {
        return Ok(Pose {
            timestamp: t,
            ..clip.frames[last].clone()
        });
    }
    let k = k as usize;
    let a = &clip.frames[k];
    if frac == 0.0 {
        return Ok(Pose {
            timestamp: t,
            ..a.clone()
        });
    }
    let b = &clip.frames[k + 1];
    Ok(Pose {
        local_rotations: a
            .local_rotations
            .iter()
            .zip(&b.local_rotations)
            .map(|(qa, qb)| quat_slerp(qa, qb, frac))
            .collect(),
        root_translation: lerp3(&a.root_translation, &b.root_translation, frac),
        timestamp: t,
    })
}
