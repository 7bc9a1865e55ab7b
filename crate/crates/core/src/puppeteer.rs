//! The motion-source blender.
//!
//! Acting inputs are routed per body region with ordered weights. Each region
//! folds its sources with weighted slerp in listed order, so the order in a
//! config is significant. Regions whose sources have no data yet hold their
//! last blended value (or the rest pose) and are reported as degraded.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::math::{compose, lerp3, quat_slerp, yaw_rotation, Vec3};
use crate::skeleton::{Pose, NEUTRAL_JOINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BodyRegion {
    Root,
    Spine,
    Head,
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
    LeftHand,
    RightHand,
}

impl BodyRegion {
    pub const ALL: [BodyRegion; 9] = [
        BodyRegion::Root,
        BodyRegion::Spine,
        BodyRegion::Head,
        BodyRegion::LeftArm,
        BodyRegion::RightArm,
        BodyRegion::LeftLeg,
        BodyRegion::RightLeg,
        BodyRegion::LeftHand,
        BodyRegion::RightHand,
    ];

    /// Neutral-rig joint indices owned by this region. The nine regions
    /// partition the 23 neutral joints.
    pub fn joints(self) -> &'static [usize] {
        match self {
            BodyRegion::Root => &[0],
            BodyRegion::Spine => &[1, 2, 3],
            BodyRegion::Head => &[4, 5, 6],
            BodyRegion::LeftArm => &[7, 8, 9],
            BodyRegion::LeftHand => &[10],
            BodyRegion::RightArm => &[11, 12, 13],
            BodyRegion::RightHand => &[14],
            BodyRegion::LeftLeg => &[15, 16, 17, 18],
            BodyRegion::RightLeg => &[19, 20, 21, 22],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BodyRegion::Root => "Root",
            BodyRegion::Spine => "Spine",
            BodyRegion::Head => "Head",
            BodyRegion::LeftArm => "LeftArm",
            BodyRegion::RightArm => "RightArm",
            BodyRegion::LeftLeg => "LeftLeg",
            BodyRegion::RightLeg => "RightLeg",
            BodyRegion::LeftHand => "LeftHand",
            BodyRegion::RightHand => "RightHand",
        }
    }

    fn bit(self) -> u16 {
        1 << self as u16
    }
}

impl fmt::Display for BodyRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BodyRegion {
    type Err = PuppeteerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BodyRegion::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| PuppeteerError::UnknownRegion(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RegionSet(u16);

impl RegionSet {
    pub const fn empty() -> Self {
        Self(0)
    }

    pub const fn all() -> Self {
        Self(0x1ff)
    }

    pub fn only(region: BodyRegion) -> Self {
        Self(region.bit())
    }

    pub fn contains(self, region: BodyRegion) -> bool {
        self.0 & region.bit() != 0
    }

    pub fn insert(&mut self, region: BodyRegion) {
        self.0 |= region.bit();
    }

    pub fn iter(self) -> impl Iterator<Item = BodyRegion> {
        BodyRegion::ALL.into_iter().filter(move |r| self.contains(*r))
    }
}

impl FromIterator<BodyRegion> for RegionSet {
    fn from_iter<I: IntoIterator<Item = BodyRegion>>(iter: I) -> Self {
        let mut set = RegionSet::empty();
        for r in iter {
            set.insert(r);
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputKind {
    MocapStream,
    Replay,
    Gamepad,
    Pathfinder,
}

impl InputKind {
    /// Whether the input carries full neutral-space poses.
    pub fn carries_pose(self) -> bool {
        matches!(self, InputKind::MocapStream | InputKind::Replay)
    }
}

/// A root-transform nudge: world translation plus a yaw about the root.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RefMove {
    pub translation: Vec3,
    pub yaw_deg: f64,
}

impl RefMove {
    pub fn new(translation: Vec3, yaw_deg: f64) -> Self {
        Self { translation, yaw_deg }
    }

    pub fn is_zero(&self) -> bool {
        self.translation == Vec3::zeros() && self.yaw_deg == 0.0
    }
}

impl std::ops::Neg for RefMove {
    type Output = RefMove;

    fn neg(self) -> RefMove {
        RefMove {
            translation: -self.translation,
            yaw_deg: -self.yaw_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputData {
    Pose(Pose),
    RefMove(RefMove),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActingInput {
    pub id: String,
    pub kind: InputKind,
    pub latest: Option<InputData>,
    pub region_capability: RegionSet,
}

impl ActingInput {
    fn pose(&self) -> Option<&Pose> {
        match &self.latest {
            Some(InputData::Pose(p)) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InputHandle(usize);

#[derive(Debug, Error, PartialEq)]
pub enum PuppeteerError {
    #[error("input id {0:?} is already registered")]
    DuplicateId(String),
    #[error("unknown input {0:?}")]
    UnknownInput(String),
    #[error("unknown body region {0:?}")]
    UnknownRegion(String),
    #[error("input {input:?} cannot drive region {region}")]
    RegionNotSupported { input: String, region: BodyRegion },
    #[error("input {0:?} does not carry poses and cannot be blended")]
    NotBlendable(String),
    #[error("weight {weight} for input {input:?} in region {region} must be finite and non-negative")]
    InvalidWeight {
        input: String,
        region: BodyRegion,
        weight: f64,
    },
    #[error("weights of region {0} sum to zero")]
    ZeroWeight(BodyRegion),
    #[error("invalid puppeteer config document: {0}")]
    Document(String),
}

/// Inputs known to the puppeteer. Registration happens between ticks.
#[derive(Debug, Clone, Default)]
pub struct InputRegistry {
    inputs: Vec<ActingInput>,
    by_id: HashMap<String, usize>,
}

impl InputRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_input(
        &mut self,
        id: &str,
        kind: InputKind,
        regions: RegionSet,
    ) -> Result<InputHandle, PuppeteerError> {
        if self.by_id.contains_key(id) {
            return Err(PuppeteerError::DuplicateId(id.to_string()));
        }
        self.inputs.push(ActingInput {
            id: id.to_string(),
            kind,
            latest: None,
            region_capability: regions,
        });
        self.by_id.insert(id.to_string(), self.inputs.len() - 1);
        Ok(InputHandle(self.inputs.len() - 1))
    }

    pub fn handle(&self, id: &str) -> Option<InputHandle> {
        self.by_id.get(id).copied().map(InputHandle)
    }

    pub fn get(&self, handle: InputHandle) -> &ActingInput {
        &self.inputs[handle.0]
    }

    pub fn find(&self, id: &str) -> Option<&ActingInput> {
        self.by_id.get(id).map(|&i| &self.inputs[i])
    }

    pub fn set_latest(&mut self, handle: InputHandle, data: InputData) {
        self.inputs[handle.0].latest = Some(data);
    }

    pub fn inputs(&self) -> &[ActingInput] {
        &self.inputs
    }

    /// Copy of every input, taken at tick start.
    pub fn snapshot(&self) -> Vec<ActingInput> {
        self.inputs.clone()
    }
}

/// Per-region ordered `(input id, weight)` routes with weights summing to one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PuppeteerConfig {
    routes: BTreeMap<BodyRegion, Vec<(String, f64)>>,
}

impl PuppeteerConfig {
    /// Validates routes against the registry and normalizes weights per region.
    pub fn new(
        routes: BTreeMap<BodyRegion, Vec<(String, f64)>>,
        registry: &InputRegistry,
    ) -> Result<Self, PuppeteerError> {
        let mut out = BTreeMap::new();
        for (region, sources) in routes {
            if sources.is_empty() {
                continue;
            }
            for (id, weight) in &sources {
                let input = registry
                    .find(id)
                    .ok_or_else(|| PuppeteerError::UnknownInput(id.clone()))?;
                if !input.kind.carries_pose() {
                    return Err(PuppeteerError::NotBlendable(id.clone()));
                }
                if !input.region_capability.contains(region) {
                    return Err(PuppeteerError::RegionNotSupported {
                        input: id.clone(),
                        region,
                    });
                }
                if !(weight.is_finite() && *weight >= 0.0) {
                    return Err(PuppeteerError::InvalidWeight {
                        input: id.clone(),
                        region,
                        weight: *weight,
                    });
                }
            }
            let total: f64 = sources.iter().map(|(_, w)| w).sum();
            if total <= 0.0 {
                return Err(PuppeteerError::ZeroWeight(region));
            }
            let normalized = sources.into_iter().map(|(id, w)| (id, w / total)).collect();
            out.insert(region, normalized);
        }
        Ok(Self { routes: out })
    }

    /// Routes every region to one input with weight 1.
    pub fn single(id: &str, registry: &InputRegistry) -> Result<Self, PuppeteerError> {
        let routes = BodyRegion::ALL
            .into_iter()
            .map(|r| (r, vec![(id.to_string(), 1.0)]))
            .collect();
        Self::new(routes, registry)
    }

    pub fn sources(&self, region: BodyRegion) -> &[(String, f64)] {
        self.routes.get(&region).map_or(&[], Vec::as_slice)
    }

    pub fn from_document(doc: &ConfigDocument, registry: &InputRegistry) -> Result<Self, PuppeteerError> {
        let mut routes: BTreeMap<BodyRegion, Vec<(String, f64)>> = BTreeMap::new();
        let entries = |v: &Vec<RouteEntry>| v.iter().map(|e| (e.input.clone(), e.weight)).collect::<Vec<_>>();
        for (name, list) in &doc.regions {
            if name == "All" {
                continue;
            }
            routes.insert(name.parse()?, entries(list));
        }
        if let Some(all) = doc.regions.get("All") {
            for r in BodyRegion::ALL {
                routes.entry(r).or_insert_with(|| entries(all));
            }
        }
        Self::new(routes, registry)
    }
}

/// Text form of a puppeteer config (TOML). Listing order is blend order.
///
/// ```toml
/// [regions]
/// All = [{ input = "neuron1" }]
/// LeftArm = [{ input = "neuron2", weight = 0.7 }, { input = "neuron1", weight = 0.3 }]
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default)]
    pub regions: BTreeMap<String, Vec<RouteEntry>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteEntry {
    pub input: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl ConfigDocument {
    pub fn from_toml(text: &str) -> Result<Self, PuppeteerError> {
        toml::from_str(text).map_err(|e| PuppeteerError::Document(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendResult {
    pub pose: Pose,
    /// Regions that fell back because a routed input had no data.
    pub degraded: Vec<BodyRegion>,
}

/// Blends one neutral pose from the input snapshot.
///
/// `fallback` supplies joints for regions without sources and for regions
/// whose sources have no data yet; it must be a neutral-rig pose.
pub fn blend(config: &PuppeteerConfig, inputs: &[ActingInput], fallback: &Pose) -> BlendResult {
    let find = |id: &str| inputs.iter().find(|i| i.id == id);
    let mut pose = Pose {
        local_rotations: fallback.local_rotations.clone(),
        root_translation: fallback.root_translation,
        timestamp: fallback.timestamp,
    };
    let mut degraded = Vec::new();
    let mut newest: Option<f64> = None;

    for region in BodyRegion::ALL {
        let sources = config.sources(region);
        if sources.is_empty() {
            continue;
        }
        let available: Vec<(&Pose, f64)> = sources
            .iter()
            .filter_map(|(id, w)| find(id).and_then(ActingInput::pose).map(|p| (p, *w)))
            .filter(|(p, _)| p.local_rotations.len() == NEUTRAL_JOINTS.len())
            .collect();
        if available.len() < sources.len() {
            degraded.push(region);
        }
        let Some(((first, first_w), rest)) = available.split_first() else {
            continue;
        };
        if available.iter().all(|(_, w)| *w == 0.0) {
            continue;
        }
        newest = Some(
            available
                .iter()
                .fold(newest.unwrap_or(f64::MIN), |t, (p, _)| t.max(p.timestamp)),
        );

        for &j in region.joints() {
            let mut acc = first.local_rotations[j];
            let mut cumulative = *first_w;
            for (p, w) in rest {
                cumulative += w;
                if cumulative > 0.0 {
                    acc = quat_slerp(&acc, &p.local_rotations[j], w / cumulative);
                }
            }
            pose.local_rotations[j] = acc;
        }
        if region == BodyRegion::Root {
            let mut acc = first.root_translation;
            let mut cumulative = *first_w;
            for (p, w) in rest {
                cumulative += w;
                if cumulative > 0.0 && *w > 0.0 && p.root_translation != acc {
                    acc = lerp3(&acc, &p.root_translation, w / cumulative);
                }
            }
            pose.root_translation = acc;
        }
    }
    if let Some(t) = newest {
        pose.timestamp = t;
    }
    BlendResult { pose, degraded }
}

/// Stateful wrapper applying the hold-last-or-rest policy across ticks.
#[derive(Debug, Clone)]
pub struct Blender {
    rest: Pose,
    last: Option<Pose>,
}

impl Blender {
    pub fn new(rest: Pose) -> Self {
        Self { rest, last: None }
    }

    pub fn blend(&mut self, config: &PuppeteerConfig, inputs: &[ActingInput]) -> BlendResult {
        let mut fallback = self.last.clone().unwrap_or_else(|| self.rest.clone());
        // unrouted regions always show the rest pose
        for region in BodyRegion::ALL {
            if config.sources(region).is_empty() {
                for &j in region.joints() {
                    fallback.local_rotations[j] = self.rest.local_rotations[j];
                }
                if region == BodyRegion::Root {
                    fallback.root_translation = self.rest.root_translation;
                }
            }
        }
        let result = blend(config, inputs, &fallback);
        self.last = Some(result.pose.clone());
        result
    }
}

/// Applies a gamepad nudge: yaw about the root, then a world offset. Limb
/// rotations are untouched.
pub fn apply_ref_move(pose: &Pose, delta: &RefMove) -> Pose {
    let mut out = pose.clone();
    if delta.yaw_deg != 0.0 {
        out.local_rotations[0] = compose(&yaw_rotation(delta.yaw_deg), &pose.local_rotations[0]);
    }
    if delta.translation != Vec3::zeros() {
        out.root_translation += delta.translation;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GamepadAxes {
    pub left_x: f64,
    pub left_y: f64,
    pub right_x: f64,
}

/// Stick-to-nudge mapping. Left stick X/Y drive world X/Z translation, right
/// stick X drives yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GamepadMapping {
    pub speed_mps: f64,
    pub yaw_rate_dps: f64,
    pub dead_zone: f64,
}

impl Default for GamepadMapping {
    fn default() -> Self {
        Self {
            speed_mps: 1.0,
            yaw_rate_dps: 90.0,
            dead_zone: 0.1,
        }
    }
}

impl GamepadMapping {
    fn shape(&self, v: f64) -> f64 {
        let v = v.clamp(-1.0, 1.0);
        if v.abs() <= self.dead_zone {
            0.0
        } else {
            v.signum() * (v.abs() - self.dead_zone) / (1.0 - self.dead_zone)
        }
    }

    pub fn ref_move(&self, axes: &GamepadAxes, dt: f64) -> RefMove {
        let x = self.shape(axes.left_x) * self.speed_mps * dt;
        let z = self.shape(axes.left_y) * self.speed_mps * dt;
        let yaw = self.shape(axes.right_x) * self.yaw_rate_dps * dt;
        RefMove::new(Vec3::new(x, 0.0, z), yaw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{facing_yaw, Quat};
    use crate::skeleton::neutral_skeleton;
    use nalgebra::UnitQuaternion;

    fn posed(seed: f64) -> Pose {
        let s = neutral_skeleton();
        let mut p = Pose::rest(&s);
        for (i, q) in p.local_rotations.iter_mut().enumerate() {
            *q = UnitQuaternion::from_euler_angles(seed * 0.1 * i as f64, seed * 0.2, -seed * 0.05 * i as f64);
        }
        p.root_translation = Vec3::new(seed, 0.9, -seed);
        p
    }

    fn registry(ids: &[&str]) -> InputRegistry {
        let mut r = InputRegistry::new();
        for id in ids {
            r.register_input(id, InputKind::MocapStream, RegionSet::all()).unwrap();
        }
        r
    }

    #[test]
    fn register_rules() {
        let mut r = InputRegistry::new();
        let h = r
            .register_input("neuron1", InputKind::MocapStream, RegionSet::all())
            .unwrap();
        assert!(r.get(h).latest.is_none());
        assert_eq!(
            r.register_input("neuron1", InputKind::Replay, RegionSet::all()),
            Err(PuppeteerError::DuplicateId("neuron1".into()))
        );
        let pad = r
            .register_input("pad1", InputKind::Gamepad, RegionSet::only(BodyRegion::Root))
            .unwrap();
        let cap = r.get(pad).region_capability;
        assert!(cap.contains(BodyRegion::Root));
        assert_eq!(cap.iter().count(), 1);
    }

    #[test]
    fn regions_partition_the_neutral_rig() {
        let mut seen = vec![0; NEUTRAL_JOINTS.len()];
        for r in BodyRegion::ALL {
            for &j in r.joints() {
                seen[j] += 1;
            }
        }
        assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn single_source_passes_through() {
        let mut reg = registry(&["a"]);
        let pose = posed(1.0);
        reg.set_latest(reg.handle("a").unwrap(), InputData::Pose(pose.clone()));
        let cfg = PuppeteerConfig::single("a", &reg).unwrap();
        let out = blend(&cfg, &reg.snapshot(), &Pose::rest(&neutral_skeleton()));
        assert_eq!(out.pose, pose);
        assert!(out.degraded.is_empty());
    }

    #[test]
    fn blend_of_equals_is_that_pose() {
        let mut reg = registry(&["a", "b"]);
        let pose = posed(0.7);
        reg.set_latest(reg.handle("a").unwrap(), InputData::Pose(pose.clone()));
        reg.set_latest(reg.handle("b").unwrap(), InputData::Pose(pose.clone()));
        let routes = BodyRegion::ALL
            .into_iter()
            .map(|r| (r, vec![("a".to_string(), 0.3), ("b".to_string(), 0.7)]))
            .collect();
        let cfg = PuppeteerConfig::new(routes, &reg).unwrap();
        let out = blend(&cfg, &reg.snapshot(), &Pose::rest(&neutral_skeleton()));
        assert_eq!(out.pose.local_rotations, pose.local_rotations);
        assert_eq!(out.pose.root_translation, pose.root_translation);
    }

    #[test]
    fn arms_from_one_source_rest_from_another() {
        let mut reg = registry(&["a", "b"]);
        let (pa, pb) = (posed(1.0), posed(-0.5));
        reg.set_latest(reg.handle("a").unwrap(), InputData::Pose(pa.clone()));
        reg.set_latest(reg.handle("b").unwrap(), InputData::Pose(pb.clone()));
        let arms = [BodyRegion::LeftArm, BodyRegion::RightArm];
        let routes = BodyRegion::ALL
            .into_iter()
            .map(|r| (r, vec![(if arms.contains(&r) { "a" } else { "b" }.to_string(), 1.0)]))
            .collect();
        let cfg = PuppeteerConfig::new(routes, &reg).unwrap();
        let out = blend(&cfg, &reg.snapshot(), &Pose::rest(&neutral_skeleton()));
        for r in BodyRegion::ALL {
            let src = if arms.contains(&r) { &pa } else { &pb };
            for &j in r.joints() {
                assert_eq!(out.pose.local_rotations[j], src.local_rotations[j], "joint {j}");
            }
        }
        assert_eq!(out.pose.root_translation, pb.root_translation);
    }

    #[test]
    fn weighted_pair_lands_between() {
        let mut reg = registry(&["a", "b"]);
        let s = neutral_skeleton();
        let mut pa = Pose::rest(&s);
        let mut pb = Pose::rest(&s);
        pa.local_rotations[5] = Quat::identity();
        pb.local_rotations[5] = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), 1.0);
        pb.root_translation.x = 2.0;
        reg.set_latest(reg.handle("a").unwrap(), InputData::Pose(pa));
        reg.set_latest(reg.handle("b").unwrap(), InputData::Pose(pb));
        let routes = [BodyRegion::Head, BodyRegion::Root]
            .into_iter()
            .map(|r| (r, vec![("a".to_string(), 1.0), ("b".to_string(), 3.0)]))
            .collect();
        let cfg = PuppeteerConfig::new(routes, &reg).unwrap();
        assert_eq!(cfg.sources(BodyRegion::Head)[1].1, 0.75);
        let out = blend(&cfg, &reg.snapshot(), &Pose::rest(&s));
        assert!((out.pose.local_rotations[5].angle() - 0.75).abs() < 1e-12);
        assert!((out.pose.root_translation.x - 1.5).abs() < 1e-12);
    }

    #[test]
    fn missing_data_holds_last_then_rest() {
        let s = neutral_skeleton();
        let mut reg = registry(&["a", "b"]);
        let routes = BTreeMap::from([
            (BodyRegion::Head, vec![("a".to_string(), 1.0)]),
            (BodyRegion::LeftArm, vec![("b".to_string(), 1.0)]),
        ]);
        let cfg = PuppeteerConfig::new(routes, &reg).unwrap();
        let mut blender = Blender::new(Pose::rest(&s));

        let out = blender.blend(&cfg, &reg.snapshot());
        assert_eq!(out.pose, Pose::rest(&s));
        assert_eq!(out.degraded, vec![BodyRegion::Head, BodyRegion::LeftArm]);

        let pa = posed(1.0);
        reg.set_latest(reg.handle("a").unwrap(), InputData::Pose(pa.clone()));
        let out = blender.blend(&cfg, &reg.snapshot());
        assert_eq!(out.pose.local_rotations[5], pa.local_rotations[5]);
        assert_eq!(out.degraded, vec![BodyRegion::LeftArm]);

        // "a" drops out again: head holds the last blended value
        let mut snapshot = reg.snapshot();
        snapshot[0].latest = None;
        let out = blender.blend(&cfg, &snapshot);
        assert_eq!(out.pose.local_rotations[5], pa.local_rotations[5]);
        assert!(out.degraded.contains(&BodyRegion::Head));
    }

    #[test]
    fn config_validation() {
        let mut reg = registry(&["a"]);
        reg.register_input("pad", InputKind::Gamepad, RegionSet::only(BodyRegion::Root))
            .unwrap();
        reg.register_input("legs", InputKind::Replay, RegionSet::only(BodyRegion::LeftLeg))
            .unwrap();
        let route = |r: BodyRegion, id: &str, w: f64| BTreeMap::from([(r, vec![(id.to_string(), w)])]);
        assert_eq!(
            PuppeteerConfig::new(route(BodyRegion::Root, "zz", 1.0), &reg),
            Err(PuppeteerError::UnknownInput("zz".into()))
        );
        assert_eq!(
            PuppeteerConfig::new(route(BodyRegion::Root, "pad", 1.0), &reg),
            Err(PuppeteerError::NotBlendable("pad".into()))
        );
        assert!(matches!(
            PuppeteerConfig::new(route(BodyRegion::Head, "legs", 1.0), &reg),
            Err(PuppeteerError::RegionNotSupported { .. })
        ));
        assert_eq!(
            PuppeteerConfig::new(route(BodyRegion::Head, "a", 0.0), &reg),
            Err(PuppeteerError::ZeroWeight(BodyRegion::Head))
        );
        assert!(matches!(
            PuppeteerConfig::new(route(BodyRegion::Head, "a", -1.0), &reg),
            Err(PuppeteerError::InvalidWeight { .. })
        ));
    }

    #[test]
    fn config_document_with_all_shortcut() {
        let reg = registry(&["n1", "n2"]);
        let doc = ConfigDocument::from_toml(
            "[regions]\nAll = [{ input = \"n1\" }]\nLeftArm = [{ input = \"n2\", weight = 3 }, { input = \"n1\", weight = 1 }]\n",
        )
        .unwrap();
        let cfg = PuppeteerConfig::from_document(&doc, &reg).unwrap();
        assert_eq!(cfg.sources(BodyRegion::Head), &[("n1".to_string(), 1.0)]);
        assert_eq!(
            cfg.sources(BodyRegion::LeftArm),
            &[("n2".to_string(), 0.75), ("n1".to_string(), 0.25)]
        );
        let bad = ConfigDocument::from_toml("[regions]\nTail = [{ input = \"n1\" }]\n").unwrap();
        assert_eq!(
            PuppeteerConfig::from_document(&bad, &reg),
            Err(PuppeteerError::UnknownRegion("Tail".into()))
        );
    }

    #[test]
    fn ref_move_examples() {
        let p = posed(0.3);
        assert_eq!(apply_ref_move(&p, &RefMove::default()), p);

        let turned = apply_ref_move(&p, &RefMove::new(Vec3::zeros(), 180.0));
        assert_eq!(turned.root_translation, p.root_translation);
        let before = facing_yaw(&p.local_rotations[0]);
        let after = facing_yaw(&turned.local_rotations[0]);
        assert!((crate::math::wrap_degrees(after - before) - 180.0).abs() < 1e-9);
        assert_eq!(turned.local_rotations[1..], p.local_rotations[1..]);

        let moved = apply_ref_move(&p, &RefMove::new(Vec3::new(0.0, 0.0, 1.0), 0.0));
        assert_eq!(moved.root_translation.z, p.root_translation.z + 1.0);
        assert_eq!(moved.local_rotations, p.local_rotations);
    }

    #[test]
    fn gamepad_dead_zone() {
        let m = GamepadMapping::default();
        let still = m.ref_move(
            &GamepadAxes {
                left_x: 0.05,
                left_y: -0.09,
                right_x: 0.1,
            },
            0.1,
        );
        assert!(still.is_zero());
        let full = m.ref_move(
            &GamepadAxes {
                left_x: 1.0,
                left_y: 0.0,
                right_x: -1.0,
            },
            0.5,
        );
        assert!((full.translation.x - 0.5).abs() < 1e-12);
        assert!((full.yaw_deg + 45.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn ref_move_inverts(x in -5.0f64..5.0, z in -5.0f64..5.0, yaw in -180.0f64..180.0, seed in -2.0f64..2.0) {
            let p = posed(seed);
            let d = RefMove::new(Vec3::new(x, 0.0, z), yaw);
            let back = apply_ref_move(&apply_ref_move(&p, &d), &-d);
            proptest::prop_assert!((back.root_translation - p.root_translation).norm() < 1e-6);
            for (a, b) in back.local_rotations.iter().zip(&p.local_rotations) {
                let dot = a.as_ref().coords.dot(&b.as_ref().coords).abs();
                proptest::prop_assert!((1.0 - dot) < 1e-6);
            }
        }

        #[test]
        fn regional_isolation(seed_a in -2.0f64..2.0, seed_b in -2.0f64..2.0, seed_c in -2.0f64..2.0) {
            let mut reg = registry(&["a", "b"]);
            let routes = BodyRegion::ALL
                .into_iter()
                .map(|r| (r, vec![(if r == BodyRegion::LeftArm { "a" } else { "b" }.to_string(), 1.0)]))
                .collect();
            let cfg = PuppeteerConfig::new(routes, &reg).unwrap();
            let rest = Pose::rest(&neutral_skeleton());
            reg.set_latest(reg.handle("a").unwrap(), InputData::Pose(posed(seed_a)));
            reg.set_latest(reg.handle("b").unwrap(), InputData::Pose(posed(seed_b)));
            let first = blend(&cfg, &reg.snapshot(), &rest);
            reg.set_latest(reg.handle("a").unwrap(), InputData::Pose(posed(seed_c)));
            let second = blend(&cfg, &reg.snapshot(), &rest);
            for r in BodyRegion::ALL.into_iter().filter(|r| *r != BodyRegion::LeftArm) {
                for &j in r.joints() {
                    proptest::prop_assert_eq!(first.pose.local_rotations[j], second.pose.local_rotations[j]);
                }
            }
        }
    }
}
