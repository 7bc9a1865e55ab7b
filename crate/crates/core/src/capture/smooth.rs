//! Per-channel exponential smoothing of device frames.

use thiserror::Error;

use super::DeviceFrame;
use crate::math::{lerp3, quat_slerp, Quat, Vec3};

pub const DEFAULT_SMOOTH_ALPHA: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum SmoothError {
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("smoother tracks {state} channels but the frame has {frame}")]
    ChannelMismatch { state: usize, frame: usize },
}

/// Previous estimate per channel. `alpha` is the weight of the incoming
/// sample: 1 passes frames through, 0 freezes the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherState {
    rotations: Vec<Quat>,
    root: Vec3,
    alpha: f64,
}

impl SmootherState {
    /// Starts from the given frame's values.
    pub fn seeded(frame: &DeviceFrame, alpha: f64) -> Result<Self, SmoothError> {
        check_alpha(alpha)?;
        Ok(Self {
            rotations: frame.local_rotations.clone(),
            root: frame.root_translation,
            alpha,
        })
    }

    /// Starts from identity rotations and the origin.
    pub fn at_rest(channels: usize, alpha: f64) -> Result<Self, SmoothError> {
        check_alpha(alpha)?;
        Ok(Self {
            rotations: vec![Quat::identity(); channels],
            root: Vec3::zeros(),
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn channels(&self) -> usize {
        self.rotations.len()
    }
}

fn check_alpha(alpha: f64) -> Result<(), SmoothError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(SmoothError::InvalidAlpha(alpha))
    }
}

/// Moves the estimate toward `frame` by `alpha` and returns the filtered frame.
pub fn smooth(state: SmootherState, frame: &DeviceFrame) -> Result<(SmootherState, DeviceFrame), SmoothError> {
    if state.rotations.len() != frame.joint_count() {
        return Err(SmoothError::ChannelMismatch {
            state: state.rotations.len(),
            frame: frame.joint_count(),
        });
    }
    let alpha = state.alpha;
    let rotations: Vec<Quat> = state
        .rotations
        .iter()
        .zip(&frame.local_rotations)
        .map(|(prev, incoming)| quat_slerp(prev, incoming, alpha))
        .collect();
    let root = lerp3(&state.root, &frame.root_translation, alpha);
    let out = DeviceFrame {
        local_rotations: rotations.clone(),
        root_translation: root,
        ..frame.clone()
    };
    Ok((SmootherState { rotations, root, alpha }, out))
}
