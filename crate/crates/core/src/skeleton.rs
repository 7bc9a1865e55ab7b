//! Joint hierarchies, poses and forward kinematics.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::math::{compose, is_unit, Quat, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Index of the parent joint; `None` for the root.
    pub parent: Option<usize>,
    /// Offset from the parent in bind pose, meters.
    pub bind_offset: Vec3,
    pub bind_rotation: Quat,
}

impl Joint {
    pub fn new(name: impl Into<String>, parent: Option<usize>, bind_offset: Vec3) -> Self {
        Self {
            name: name.into(),
            parent,
            bind_offset,
            bind_rotation: Quat::identity(),
        }
    }

    pub fn with_bind_rotation(mut self, rotation: Quat) -> Self {
        self.bind_rotation = rotation;
        self
    }
}

/// A topologically sorted joint list with a single root at index 0.
///
/// Fields are public so that malformed rigs can be described and passed to
/// [`validate_skeleton`]; [`Skeleton::new`] refuses to build one.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub joints: Vec<Joint>,
    /// Bind-pose vertical extent, head top to floor, meters.
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    NoRoot,
    MultipleRoots {
        joints: Vec<usize>,
    },
    Cycle {
        joint: usize,
    },
    ParentOutOfRange {
        joint: usize,
        parent: usize,
    },
    /// Parent appears after the child.
    NotTopological {
        joint: usize,
        parent: usize,
    },
    DuplicateName {
        name: String,
    },
    NonUnitBindRotation {
        joint: usize,
    },
    NonPositiveHeight,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty skeleton"),
            Violation::NoRoot => write!(f, "no root joint"),
            Violation::MultipleRoots { joints } => write!(f, "multiple roots {joints:?}"),
            Violation::Cycle { joint } => write!(f, "cycle through joint {joint}"),
            Violation::ParentOutOfRange { joint, parent } => {
                write!(f, "joint {joint} has out-of-range parent {parent}")
            }
            Violation::NotTopological { joint, parent } => {
                write!(f, "joint {joint} precedes its parent {parent}")
            }
            Violation::DuplicateName { name } => write!(f, "duplicate name {name:?}"),
            Violation::NonUnitBindRotation { joint } => {
                write!(f, "joint {joint} has a non-unit bind rotation")
            }
            Violation::NonPositiveHeight => write!(f, "height must be positive"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SkeletonError {
    #[error("invalid skeleton: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("pose has {pose} rotations but the skeleton has {skeleton} joints")]
    PoseMismatch { pose: usize, skeleton: usize },
    #[error("no joint named {0:?}")]
    UnknownJoint(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Returns every invariant violation found in `skeleton`.
pub fn validate_skeleton(skeleton: &Skeleton) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let joints = &skeleton.joints;
    if joints.is_empty() {
        out.push(Violation::Empty);
    }
    if !(skeleton.height > 0.0) {
        out.push(Violation::NonPositiveHeight);
    }

    let roots: Vec<usize> = joints
        .iter()
        .enumerate()
        .filter(|(_, j)| j.parent.is_none())
        .map(|(i, _)| i)
        .collect();
    match roots.len() {
        0 if !joints.is_empty() => out.push(Violation::NoRoot),
        0 | 1 => {}
        _ => out.push(Violation::MultipleRoots { joints: roots }),
    }

    for (i, joint) in joints.iter().enumerate() {
        if let Some(p) = joint.parent {
            if p >= joints.len() {
                out.push(Violation::ParentOutOfRange { joint: i, parent: p });
            } else if p == i || reaches_itself(joints, i) {
                out.push(Violation::Cycle { joint: i });
            } else if p > i {
                out.push(Violation::NotTopological { joint: i, parent: p });
            }
        }
        if !is_unit(joint.bind_rotation.as_ref()) {
            out.push(Violation::NonUnitBindRotation { joint: i });
        }
    }

    let mut seen = HashSet::new();
    for joint in joints {
        if !seen.insert(joint.name.as_str()) {
            out.push(Violation::DuplicateName {
                name: joint.name.clone(),
            });
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn reaches_itself(joints: &[Joint], start: usize) -> bool {
    let mut cur = joints[start].parent;
    for _ in 0..joints.len() {
        match cur {
            Some(p) if p == start => return true,
            Some(p) if p < joints.len() => cur = joints[p].parent,
            _ => return false,
        }
    }
    // more steps than joints: some other cycle upstream, not through `start`
    false
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>, height: f64) -> Result<Self, SkeletonError> {
        let skeleton = Self { joints, height };
        validate_skeleton(&skeleton).map_err(SkeletonError::Invalid)?;
        Ok(skeleton)
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn root(&self) -> &Joint {
        &self.joints[0]
    }

    /// Vertical extent of the bind pose.
    pub fn bind_extent(&self) -> f64 {
        let rest = Pose::rest(self);
        let world = forward_kinematics(self, &rest).expect("rest pose matches its skeleton");
        let (lo, hi) = world.iter().fold((f64::MAX, f64::MIN), |(lo, hi), t| {
            (lo.min(t.position.y), hi.max(t.position.y))
        });
        hi - lo
    }

    /// Copy of this rig with every offset and the height scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Skeleton {
        Skeleton {
            joints: self
                .joints
                .iter()
                .map(|j| Joint {
                    bind_offset: j.bind_offset * factor,
                    ..j.clone()
                })
                .collect(),
            height: self.height * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub local_rotations: Vec<Quat>,
    /// World position of the root joint, meters.
    pub root_translation: Vec3,
    pub timestamp: f64,
}

impl Pose {
    /// Identity rotations with the root at its bind offset.
    pub fn rest(skeleton: &Skeleton) -> Self {
        Self {
            local_rotations: vec![Quat::identity(); skeleton.len()],
            root_translation: skeleton.joints.first().map_or(Vec3::zeros(), |j| j.bind_offset),
            timestamp: 0.0,
        }
    }

    pub fn check_bound(&self, skeleton: &Skeleton) -> Result<(), SkeletonError> {
        if self.local_rotations.len() != skeleton.len() {
            return Err(SkeletonError::PoseMismatch {
                pose: self.local_rotations.len(),
                skeleton: skeleton.len(),
            });
        }
        Ok(())
    }

    pub fn is_normalized(&self) -> bool {
        self.local_rotations.iter().all(|q| is_unit(q.as_ref()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Quat,
    pub position: Vec3,
}

/// World transform of every joint, in joint order.
///
/// Joint `j` sits at `parent ∘ (bind_offset, bind_rotation · local)`; the root
/// is placed at the pose's root translation.
pub fn forward_kinematics(skeleton: &Skeleton, pose: &Pose) -> Result<Vec<Transform>, SkeletonError> {
    pose.check_bound(skeleton)?;
    let mut world: Vec<Transform> = Vec::with_capacity(skeleton.len());
    for (joint, local) in skeleton.joints.iter().zip(&pose.local_rotations) {
        let rotation_in_parent = compose(&joint.bind_rotation, local);
        let t = match joint.parent {
            None => Transform {
                rotation: rotation_in_parent,
                position: pose.root_translation,
            },
            Some(p) => {
                let parent = &world[p];
                Transform {
                    rotation: compose(&parent.rotation, &rotation_in_parent),
                    position: parent.position + parent.rotation * joint.bind_offset,
                }
            }
        };
        world.push(t);
    }
    Ok(world)
}

/// Names of the canonical 23-joint neutral character, in joint order.
pub const NEUTRAL_JOINTS: [&str; 23] = [
    "Hips",
    "Spine1",
    "Spine2",
    "Spine3",
    "Neck",
    "Head",
    "HeadTop",
    "LeftShoulder",
    "LeftUpperArm",
    "LeftForearm",
    "LeftHand",
    "RightShoulder",
    "RightUpperArm",
    "RightForearm",
    "RightHand",
    "LeftUpperLeg",
    "LeftLowerLeg",
    "LeftFoot",
    "LeftToe",
    "RightUpperLeg",
    "RightLowerLeg",
    "RightFoot",
    "RightToe",
];

pub const NEUTRAL_HEIGHT: f64 = 1.80;

/// The neutral character: 1.80 m, facing `+X`, left side toward `-Z`,
/// identity bind rotations, toes on the floor.
pub fn neutral_skeleton() -> Skeleton {
    // (name, parent name, offset)
    let layout: [(&str, Option<&str>, [f64; 3]); 23] = [
        ("Hips", None, [0.0, 0.95, 0.0]),
        ("Spine1", Some("Hips"), [0.0, 0.10, 0.0]),
        ("Spine2", Some("Spine1"), [0.0, 0.12, 0.0]),
        ("Spine3", Some("Spine2"), [0.0, 0.13, 0.0]),
        ("Neck", Some("Spine3"), [0.0, 0.20, 0.0]),
        ("Head", Some("Neck"), [0.0, 0.10, 0.0]),
        ("HeadTop", Some("Head"), [0.0, 0.20, 0.0]),
        ("LeftShoulder", Some("Spine3"), [0.0, 0.15, -0.05]),
        ("LeftUpperArm", Some("LeftShoulder"), [0.0, 0.0, -0.13]),
        ("LeftForearm", Some("LeftUpperArm"), [0.0, 0.0, -0.30]),
        ("LeftHand", Some("LeftForearm"), [0.0, 0.0, -0.26]),
        ("RightShoulder", Some("Spine3"), [0.0, 0.15, 0.05]),
        ("RightUpperArm", Some("RightShoulder"), [0.0, 0.0, 0.13]),
        ("RightForearm", Some("RightUpperArm"), [0.0, 0.0, 0.30]),
        ("RightHand", Some("RightForearm"), [0.0, 0.0, 0.26]),
        ("LeftUpperLeg", Some("Hips"), [0.0, -0.05, -0.10]),
        ("LeftLowerLeg", Some("LeftUpperLeg"), [0.0, -0.42, 0.0]),
        ("LeftFoot", Some("LeftLowerLeg"), [0.0, -0.40, 0.0]),
        ("LeftToe", Some("LeftFoot"), [0.14, -0.08, 0.0]),
        ("RightUpperLeg", Some("Hips"), [0.0, -0.05, 0.10]),
        ("RightLowerLeg", Some("RightUpperLeg"), [0.0, -0.42, 0.0]),
        ("RightFoot", Some("RightLowerLeg"), [0.0, -0.40, 0.0]),
        ("RightToe", Some("RightFoot"), [0.14, -0.08, 0.0]),
    ];
    let joints = layout
        .iter()
        .map(|(name, parent, o)| {
            let parent = parent.map(|p| NEUTRAL_JOINTS.iter().position(|n| *n == p).unwrap());
            Joint::new(*name, parent, Vec3::new(o[0], o[1], o[2]))
        })
        .collect();
    Skeleton::new(joints, NEUTRAL_HEIGHT).expect("neutral rig is well formed")
}
