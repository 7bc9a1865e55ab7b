//! Floor-plan geometry linking the mocaptor's capture area (B), the actors'
//! stage (A) and the avatar's digital stage (D).

use serde::Deserialize;
use thiserror::Error;

use crate::math::{compose, facing_yaw, planar_yaw, rotate_planar, wrap_degrees, yaw_rotation, Vec2};
use crate::skeleton::Pose;

/// Positions closer than this are treated as coincident.
pub const COINCIDENT_EPS: f64 = 1e-3;

/// `p ↦ scale · R(yaw) · p + offset` on the floor plane.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Similarity2 {
    #[serde(default = "unit_scale")]
    pub scale: f64,
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub offset_x: f64,
    #[serde(default)]
    pub offset_z: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for Similarity2 {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("positions are coincident; facing is undefined")]
    DegenerateGeometry,
}

impl Similarity2 {
    pub const fn identity() -> Self {
        Self {
            scale: 1.0,
            yaw_deg: 0.0,
            offset_x: 0.0,
            offset_z: 0.0,
        }
    }

    pub fn new(scale: f64, yaw_deg: f64, offset: Vec2) -> Result<Self, SpaceError> {
        let s = Self {
            scale,
            yaw_deg,
            offset_x: offset.x,
            offset_z: offset.y,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.scale > 0.0 && self.scale.is_finite() {
            Ok(())
        } else {
            Err(SpaceError::NonPositiveScale(self.scale))
        }
    }

    pub fn offset(&self) -> Vec2 {
        Vec2::new(self.offset_x, self.offset_z)
    }

    pub fn apply(&self, p: &Vec2) -> Vec2 {
        rotate_planar(p, self.yaw_deg) * self.scale + self.offset()
    }

    pub fn invert_point(&self, q: &Vec2) -> Vec2 {
        rotate_planar(&((q - self.offset()) / self.scale), -self.yaw_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceCalibration {
    #[serde(default)]
    pub b_to_d: Similarity2,
    #[serde(default)]
    pub a_to_d: Similarity2,
}

impl SpaceCalibration {
    pub fn validate(&self) -> Result<(), SpaceError> {
        self.b_to_d.validate()?;
        self.a_to_d.validate()
    }
}

/// Where the avatar stands in D and which way it faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disposition {
    pub position: Vec2,
    /// Degrees in `(-180, 180]`.
    pub yaw: f64,
}

impl Disposition {
    pub fn new(position: Vec2, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_degrees(yaw),
        }
    }

    /// Root floor position and facing of a pose.
    pub fn of_pose(pose: &Pose) -> Self {
        Self {
            position: root_planar(pose),
            yaw: facing_yaw(&pose.local_rotations[0]),
        }
    }
}

pub fn root_planar(pose: &Pose) -> Vec2 {
    Vec2::new(pose.root_translation.x, pose.root_translation.z)
}

fn set_root_planar(pose: &mut Pose, p: Vec2) {
    pose.root_translation.x = p.x;
    pose.root_translation.z = p.y;
}

pub fn map_point_b_to_d(p: &Vec2, cal: &SpaceCalibration) -> Vec2 {
    cal.b_to_d.apply(p)
}

pub fn map_point_a_to_d(p: &Vec2, cal: &SpaceCalibration) -> Vec2 {
    cal.a_to_d.apply(p)
}

/// Carries a pose expressed in B into D: planar root position through the
/// similarity, root yaw turned by its rotation. Height is kept.
pub fn map_pose_b_to_d(pose: &Pose, cal: &SpaceCalibration) -> Pose {
    let mut out = pose.clone();
    set_root_planar(&mut out, cal.b_to_d.apply(&root_planar(pose)));
    if cal.b_to_d.yaw_deg != 0.0 {
        out.local_rotations[0] = compose(&yaw_rotation(cal.b_to_d.yaw_deg), &pose.local_rotations[0]);
    }
    out
}

/// Turns space B by `theta` degrees about `pivot`: the root moves around the
/// pivot and its yaw turns with it; every other joint is left bit-identical.
pub fn rotate_space_b(pose: &Pose, theta: f64, pivot: &Vec2) -> Pose {
    if theta == 0.0 {
        return pose.clone();
    }
    let mut out = pose.clone();
    let p = root_planar(pose);
    set_root_planar(&mut out, rotate_planar(&(p - pivot), theta) + pivot);
    out.local_rotations[0] = compose(&yaw_rotation(theta), &pose.local_rotations[0]);
    out
}

/// Yaw the avatar must face to look at the actor.
pub fn solve_disposition(avatar: &Vec2, actor: &Vec2) -> Result<f64, SpaceError> {
    let d = actor - avatar;
    if d.norm() < COINCIDENT_EPS {
        return Err(SpaceError::DegenerateGeometry);
    }
    Ok(planar_yaw(&d))
}

/// Smallest signed turn from `current` to `target`, in `(-180, 180]`.
pub fn disposition_correction(current: f64, target: f64) -> f64 {
    wrap_degrees(target - current)
}

/// The accumulated rigid re-placement of space B: a yaw about the B origin
/// followed by an offset. Gamepad nudges, space rotations and preset landings
/// all compose into this one transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceCorrection {
    pub yaw_deg: f64,
    pub offset: Vec2,
}

impl Default for SpaceCorrection {
    fn default() -> Self {
        Self {
            yaw_deg: 0.0,
            offset: Vec2::zeros(),
        }
    }
}

impl SpaceCorrection {
    pub fn apply_point(&self, p: &Vec2) -> Vec2 {
        rotate_planar(p, self.yaw_deg) + self.offset
    }

    pub fn apply(&self, pose: &Pose) -> Pose {
        let mut out = rotate_space_b(pose, self.yaw_deg, &Vec2::zeros());
        if self.offset != Vec2::zeros() {
            let p = root_planar(&out) + self.offset;
            set_root_planar(&mut out, p);
        }
        out
    }

    /// This correction followed by a turn of `theta` about `pivot`.
    pub fn then_rotate(&self, theta: f64, pivot: &Vec2) -> Self {
        Self {
            yaw_deg: wrap_degrees(self.yaw_deg + theta),
            offset: rotate_planar(&(self.offset - pivot), theta) + pivot,
        }
    }

    pub fn then_translate(&self, delta: &Vec2) -> Self {
        Self {
            yaw_deg: self.yaw_deg,
            offset: self.offset + delta,
        }
    }

    /// The correction that lands a raw B-space pose (root at `raw_position`,
    /// facing `raw_yaw`) exactly on `target` in D.
    pub fn landing(raw_position: &Vec2, raw_yaw: f64, target: &Disposition, cal: &SpaceCalibration) -> Self {
        let yaw = disposition_correction(raw_yaw + cal.b_to_d.yaw_deg, target.yaw);
        let wanted_b = cal.b_to_d.invert_point(&target.position);
        Self {
            yaw_deg: yaw,
            offset: wanted_b - rotate_planar(raw_position, yaw),
        }
    }
}
