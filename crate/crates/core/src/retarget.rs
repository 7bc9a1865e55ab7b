//! Rotation-copy retargeting between rigs.
//!
//! The same operation runs twice per tick: device rig to the neutral
//! character, then neutral character to the displayed avatar. Mapped joints
//! copy their local rotation corrected for the bind-pose difference, unmapped
//! destination joints stay at rest, and the root translation is scaled by the
//! height ratio of the two rigs.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::math::{compose, Quat};
use crate::skeleton::{Pose, Skeleton, SkeletonError};

/// Source-name to destination-name equivalences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(transparent)]
pub struct AliasTable(pub BTreeMap<String, String>);

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, from: &str, to: &str) -> Self {
        self.0.insert(from.to_string(), to.to_string());
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    /// Names used by common BVH exporters, mapped onto the neutral rig.
    pub fn common() -> Self {
        let pairs = [
            ("Hip", "Hips"),
            ("Pelvis", "Hips"),
            ("Spine", "Spine1"),
            ("Chest", "Spine2"),
            ("Chest2", "Spine3"),
            ("UpperChest", "Spine3"),
            ("HeadEnd", "HeadTop"),
            ("LeftArm", "LeftUpperArm"),
            ("LeftForeArm", "LeftForearm"),
            ("LeftUpLeg", "LeftUpperLeg"),
            ("LeftLeg", "LeftLowerLeg"),
            ("LeftToeBase", "LeftToe"),
            ("RightArm", "RightUpperArm"),
            ("RightForeArm", "RightForearm"),
            ("RightUpLeg", "RightUpperLeg"),
            ("RightLeg", "RightLowerLeg"),
            ("RightToeBase", "RightToe"),
        ];
        Self(pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    pub fn merged(mut self, other: &AliasTable) -> Self {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointMap {
    /// `(source index, destination index)`, ordered by destination.
    pub entries: Vec<(usize, usize)>,
    /// Destination joints with no source.
    pub unmapped: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RetargetError {
    #[error("destination root {0:?} has no source joint")]
    RootUnmapped(String),
    #[error("joint map index out of range: source {source_index}, destination {dest_index}")]
    IndexOutOfRange { source_index: usize, dest_index: usize },
    #[error("destination joint {0} mapped twice")]
    DuplicateDestination(usize),
    #[error(transparent)]
    Pose(#[from] SkeletonError),
}

/// Matches every destination joint to a source joint by exact name, then by
/// alias in either direction.
pub fn build_joint_map(source: &Skeleton, dest: &Skeleton, aliases: &AliasTable) -> Result<JointMap, RetargetError> {
    let mut entries = Vec::new();
    let mut unmapped = Vec::new();
    for (d, joint) in dest.joints.iter().enumerate() {
        let found = source.index_of(&joint.name).or_else(|| {
            source.joints.iter().position(|s| {
                aliases.get(&s.name) == Some(joint.name.as_str()) || aliases.get(&joint.name) == Some(s.name.as_str())
            })
        });
        match found {
            Some(s) => entries.push((s, d)),
            None => unmapped.push(d),
        }
    }
    if unmapped.first() == Some(&0) {
        return Err(RetargetError::RootUnmapped(dest.joints[0].name.clone()));
    }
    Ok(JointMap { entries, unmapped })
}

/// A precomputed source-to-destination mapping.
#[derive(Debug, Clone)]
pub struct RetargetProfile {
    source: Skeleton,
    dest: Skeleton,
    joint_map: JointMap,
    height_ratio: f64,
    /// Per entry: `dest_bind⁻¹ · src_bind`, or `None` when the binds match.
    corrections: Vec<Option<Quat>>,
}

impl RetargetProfile {
    pub fn new(source: Skeleton, dest: Skeleton, joint_map: JointMap) -> Result<Self, RetargetError> {
        let mut seen = vec![false; dest.len()];
        for &(s, d) in &joint_map.entries {
            if s >= source.len() || d >= dest.len() {
                return Err(RetargetError::IndexOutOfRange {
                    source_index: s,
                    dest_index: d,
                });
            }
            if std::mem::replace(&mut seen[d], true) {
                return Err(RetargetError::DuplicateDestination(d));
            }
        }
        if !seen.first().copied().unwrap_or(false) {
            return Err(RetargetError::RootUnmapped(
                dest.joints.first().map(|j| j.name.clone()).unwrap_or_default(),
            ));
        }
        let corrections = joint_map
            .entries
            .iter()
            .map(|&(s, d)| {
                let src = &source.joints[s].bind_rotation;
                let dst = &dest.joints[d].bind_rotation;
                (src != dst).then(|| compose(&dst.inverse(), src))
            })
            .collect();
        Ok(Self {
            height_ratio: dest.height / source.height,
            source,
            dest,
            joint_map,
            corrections,
        })
    }

    /// Builds the joint map by name and aliases, then the profile.
    pub fn between(source: &Skeleton, dest: &Skeleton, aliases: &AliasTable) -> Result<Self, RetargetError> {
        let map = build_joint_map(source, dest, aliases)?;
        Self::new(source.clone(), dest.clone(), map)
    }

    /// Maps a rig onto itself.
    pub fn identity(skeleton: &Skeleton) -> Self {
        Self::between(skeleton, skeleton, &AliasTable::new()).expect("every joint maps to itself")
    }

    pub fn source(&self) -> &Skeleton {
        &self.source
    }

    pub fn dest(&self) -> &Skeleton {
        &self.dest
    }

    pub fn joint_map(&self) -> &JointMap {
        &self.joint_map
    }

    pub fn height_ratio(&self) -> f64 {
        self.height_ratio
    }
}

pub fn retarget(pose: &Pose, profile: &RetargetProfile) -> Result<Pose, RetargetError> {
    pose.check_bound(&profile.source)?;
    let mut rotations = vec![Quat::identity(); profile.dest.len()];
    for (&(s, d), correction) in profile.joint_map.entries.iter().zip(&profile.corrections) {
        let local = &pose.local_rotations[s];
        rotations[d] = match correction {
            None => *local,
            Some(c) => compose(c, local),
        };
    }
    let root_translation = if profile.height_ratio == 1.0 {
        pose.root_translation
    } else {
        pose.root_translation * profile.height_ratio
    };
    Ok(Pose {
        local_rotations: rotations,
        root_translation,
        timestamp: pose.timestamp,
    })
}

/// On-disk retarget profile (TOML):
///
/// ```toml
/// avatar = "avatar.bvh"     # skeleton reference, relative to this file
///
/// [aliases]                 # source joint name = destination joint name
/// Hip = "Hips"
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub avatar: Option<String>,
    #[serde(default)]
    pub aliases: AliasTable,
}

impl ProfileDocument {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::skeleton::{forward_kinematics, neutral_skeleton, Joint};
    use nalgebra::UnitQuaternion;

    fn chain(names: &[&str], height: f64) -> Skeleton {
        let joints = names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                if i == 0 {
                    Joint::new(*n, None, Vec3::new(0.0, height / 2.0, 0.0))
                } else {
                    Joint::new(*n, Some(0), Vec3::new(0.1 * i as f64, 0.3, 0.0))
                }
            })
            .collect();
        Skeleton::new(joints, height).unwrap()
    }

    #[test]
    fn identical_skeletons_map_totally() {
        let s = neutral_skeleton();
        let map = build_joint_map(&s, &s, &AliasTable::new()).unwrap();
        assert!(map.unmapped.is_empty());
        assert_eq!(map.entries.len(), 23);
        assert!(map.entries.iter().all(|(a, b)| a == b));
    }

    #[test]
    fn alias_lookup() {
        let device = chain(&["Hip", "Chest"], 1.7);
        let neutral = neutral_skeleton();
        let map = build_joint_map(&device, &neutral, &AliasTable::new().with("Hip", "Hips")).unwrap();
        assert!(map.entries.contains(&(0, 0)));
        // Chest has no alias in this table
        assert!(map.unmapped.contains(&neutral.index_of("Spine2").unwrap()));
        let map = build_joint_map(&device, &neutral, &AliasTable::common()).unwrap();
        assert!(map.entries.contains(&(1, neutral.index_of("Spine2").unwrap())));
    }

    #[test]
    fn extra_destination_joint_is_unmapped() {
        let src = chain(&["Hips", "Arm"], 1.0);
        let dst = chain(&["Hips", "Arm", "Tail"], 1.0);
        let map = build_joint_map(&src, &dst, &AliasTable::new()).unwrap();
        assert_eq!(map.unmapped, vec![2]);
    }

    #[test]
    fn root_must_map() {
        let src = chain(&["Pelvis", "Arm"], 1.0);
        let dst = chain(&["Hips", "Arm"], 1.0);
        assert_eq!(
            build_joint_map(&src, &dst, &AliasTable::new()),
            Err(RetargetError::RootUnmapped("Hips".into()))
        );
    }

    #[test]
    fn identity_profile_is_exact() {
        let s = neutral_skeleton();
        let profile = RetargetProfile::identity(&s);
        let mut pose = Pose::rest(&s);
        for (i, q) in pose.local_rotations.iter_mut().enumerate() {
            *q = UnitQuaternion::from_euler_angles(0.1 * i as f64, -0.05 * i as f64, 0.3);
        }
        pose.root_translation = Vec3::new(0.3, 0.97, -1.2);
        assert_eq!(retarget(&pose, &profile).unwrap(), pose);
    }

    #[test]
    fn root_translation_scales_by_height() {
        let src = neutral_skeleton().scaled(1.60 / 1.80);
        let dst = neutral_skeleton();
        let profile = RetargetProfile::between(&src, &dst, &AliasTable::new()).unwrap();
        let mut pose = Pose::rest(&src);
        pose.root_translation = Vec3::new(1.0, 0.0, 0.0);
        let out = retarget(&pose, &profile).unwrap();
        assert!((out.root_translation - Vec3::new(1.125, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn unmapped_joint_stays_at_bind_pose() {
        let src = chain(&["Hips", "Arm"], 1.0);
        let dst = chain(&["Hips", "Arm", "Tail"], 1.0);
        let profile = RetargetProfile::between(&src, &dst, &AliasTable::new()).unwrap();
        let mut pose = Pose::rest(&src);
        pose.local_rotations[1] = UnitQuaternion::from_euler_angles(0.4, 0.2, -0.7);
        let out = retarget(&pose, &profile).unwrap();
        let world = forward_kinematics(&dst, &out).unwrap();
        let bind = forward_kinematics(&dst, &Pose::rest(&dst)).unwrap();
        assert!((world[2].position - bind[2].position).norm() < 1e-12);
        assert!(world[2].rotation.angle_to(&bind[2].rotation) < 1e-12);
        // the mapped arm did move
        assert!(world[1].rotation.angle_to(&bind[1].rotation) > 0.1);
    }

    #[test]
    fn bind_rotation_difference_is_compensated() {
        let twist = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), 0.5);
        let src = chain(&["Hips", "Arm"], 1.0);
        let mut dst = src.clone();
        dst.joints[1].bind_rotation = twist;
        let profile = RetargetProfile::between(&src, &dst, &AliasTable::new()).unwrap();
        let mut pose = Pose::rest(&src);
        pose.local_rotations[1] = UnitQuaternion::from_euler_angles(0.3, 0.0, 0.2);
        let out = retarget(&pose, &profile).unwrap();
        // the arm ends up with the same world orientation on both rigs
        let a = forward_kinematics(&src, &pose).unwrap();
        let b = forward_kinematics(&dst, &out).unwrap();
        assert!(a[1].rotation.angle_to(&b[1].rotation) < 1e-12);
    }

    #[test]
    fn profile_document() {
        let doc = ProfileDocument::from_toml("avatar = \"rig.bvh\"\n[aliases]\nHip = \"Hips\"\n").unwrap();
        assert_eq!(doc.avatar.as_deref(), Some("rig.bvh"));
        assert_eq!(doc.aliases.get("Hip"), Some("Hips"));
        assert!(ProfileDocument::from_toml("bogus = 1").is_err());
    }
}
