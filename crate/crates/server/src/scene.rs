//! Scene files: stage geometry, spaces, zones, presets, inputs, avatar rig,
//! composition defaults, stations and role gates.
//!
//! ```toml
//! version = 1
//!
//! [stage]
//! bounds = [-12.5, -12.5, 12.5, 12.5]
//! cell_size = 0.25
//! obstacles = [[-1, -1, 1, 1]]
//!
//! [space.b_to_d]
//! yaw_deg = 0
//! offset_x = 2
//!
//! [[zones]]
//! id = "Phys1"
//! rect_b = [0, 0, 2, 2]
//! rect_d = [4, 4, 6, 6]
//! release_yaw = 90
//!
//! [presets.Dig2]
//! position = [5, 5]
//! yaw = 180
//!
//! [avatar]
//! skeleton = "avatar.bvh"
//! aliases = { Pelvis = "Hips" }
//!
//! [[inputs]]
//! id = "neuron1"
//! kind = "mocap"
//! stream = "neuron01"
//!
//! [puppeteer.regions]
//! All = [{ input = "neuron1" }]
//!
//! [composition]
//! mode = "Manipulated"
//! lights = [{ id = "key", position = [0, 4, 0], intensity = 1 }]
//!
//! [roles]
//! camera = ["Director", "DigitalArtist"]
//!
//! [[stations]]
//! id = 2
//! role = "Director"
//! address = "10.0.0.2:7400"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use stage_bus::{Role, StationDescriptor, StationError, StationRegistry};
use stage_core::capture::parse_bvh;
use stage_core::pathfind::{build_navmesh, NavMesh, PathError, Preset, PresetTable, Rect, Zone, ZoneError, ZoneMap};
use stage_core::pathfind::{DEFAULT_CELL_SIZE, DEFAULT_SPEED};
use stage_core::puppeteer::{BodyRegion, ConfigDocument, GamepadMapping, RegionSet};
use stage_core::retarget::AliasTable;
use stage_core::stagespace::{SpaceCalibration, SpaceError};
use stage_core::{neutral_skeleton, Skeleton, Vec2, Vec3};
use thiserror::Error;

use crate::command::{Gate, RoleGates};
use crate::composition::{Camera, CompositionError, CompositionState, Light, Mode};

pub const SCENE_VERSION: u32 = 1;
pub const DEFAULT_BOUNDS: [f64; 4] = [-12.5, -12.5, 12.5, 12.5];
pub const DEFAULT_STREAM: &str = "neuron01";
pub const DEFAULT_STALE_AFTER: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scene syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("unsupported scene version {0}")]
    Version(u32),
    #[error("navmesh: {0}")]
    NavMesh(#[from] PathError),
    #[error("zones: {0}")]
    Zone(#[from] ZoneError),
    #[error("space calibration: {0}")]
    Space(#[from] SpaceError),
    #[error("composition: {0}")]
    Composition(#[from] CompositionError),
    #[error("stations: {0}")]
    Station(#[from] StationError),
    #[error("avatar skeleton: {0}")]
    Avatar(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub version: Option<u32>,
    #[serde(default)]
    pub stage: StageSection,
    #[serde(default)]
    pub space: SpaceCalibration,
    #[serde(default)]
    pub zones: Vec<Zone>,
    #[serde(default)]
    pub presets: BTreeMap<String, Preset>,
    #[serde(default)]
    pub avatar: AvatarSection,
    pub inputs: Option<Vec<InputSection>>,
    pub puppeteer: Option<ConfigDocument>,
    #[serde(default)]
    pub composition: CompositionSection,
    #[serde(default)]
    pub roles: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub stations: Vec<StationSection>,
    #[serde(default)]
    pub locomotion: LocomotionSection,
    #[serde(default)]
    pub gamepad: GamepadSection,
    #[serde(default)]
    pub health: HealthSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    #[serde(default = "default_bounds")]
    pub bounds: Rect,
    #[serde(default = "default_cell")]
    pub cell_size: f64,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
}

fn default_bounds() -> Rect {
    Rect::from(DEFAULT_BOUNDS)
}

fn default_cell() -> f64 {
    DEFAULT_CELL_SIZE
}

impl Default for StageSection {
    fn default() -> Self {
        Self {
            bounds: default_bounds(),
            cell_size: default_cell(),
            obstacles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AvatarSection {
    /// BVH file whose hierarchy is the avatar rig; relative to the scene.
    pub skeleton: Option<PathBuf>,
    #[serde(default)]
    pub aliases: AliasTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKindName {
    Mocap,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RigName {
    #[default]
    Suit,
    Neutral,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub id: String,
    pub kind: InputKindName,
    /// Device stream id for mocap inputs; defaults to the input id.
    pub stream: Option<String>,
    #[serde(default)]
    pub rig: RigName,
    #[serde(default = "all_regions")]
    pub regions: Vec<String>,
    /// Exponential smoothing factor for mocap inputs.
    pub smoothing: Option<f64>,
}

fn all_regions() -> Vec<String> {
    vec!["All".into()]
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CompositionSection {
    #[serde(default)]
    pub mode: Mode,
    pub camera: Option<CameraSection>,
    #[serde(default)]
    pub lights: Vec<LightSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default = "default_fov")]
    pub fov: f64,
}

fn default_fov() -> f64 {
    Camera::default().fov
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSection {
    pub id: String,
    pub position: [f64; 3],
    #[serde(default = "unit")]
    pub intensity: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSection {
    pub id: u32,
    pub role: String,
    #[serde(default)]
    pub address: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocomotionSection {
    #[serde(default = "default_speed")]
    pub speed: f64,
}

fn default_speed() -> f64 {
    DEFAULT_SPEED
}

impl Default for LocomotionSection {
    fn default() -> Self {
        Self { speed: DEFAULT_SPEED }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GamepadSection {
    #[serde(default = "gp_speed")]
    pub speed_mps: f64,
    #[serde(default = "gp_yaw")]
    pub yaw_rate_dps: f64,
    #[serde(default = "gp_dead")]
    pub dead_zone: f64,
}

fn gp_speed() -> f64 {
    GamepadMapping::default().speed_mps
}

fn gp_yaw() -> f64 {
    GamepadMapping::default().yaw_rate_dps
}

fn gp_dead() -> f64 {
    GamepadMapping::default().dead_zone
}

impl Default for GamepadSection {
    fn default() -> Self {
        Self {
            speed_mps: gp_speed(),
            yaw_rate_dps: gp_yaw(),
            dead_zone: gp_dead(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthSection {
    /// Seconds without new data before an input counts as stale.
    #[serde(default = "stale_after")]
    pub stale_after: f64,
}

fn stale_after() -> f64 {
    DEFAULT_STALE_AFTER
}

impl Default for HealthSection {
    fn default() -> Self {
        Self {
            stale_after: DEFAULT_STALE_AFTER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSpec {
    Mocap,
    Replay,
}

/// A declared acting input, resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDecl {
    pub id: String,
    pub kind: InputSpec,
    pub stream: Option<String>,
    pub rig: RigName,
    pub regions: RegionSet,
    pub smoothing: Option<f64>,
}

/// A validated scene ready for the stage.
#[derive(Debug, Clone)]
pub struct Scene {
    pub bounds: Rect,
    pub obstacles: Vec<Rect>,
    pub navmesh: NavMesh,
    pub calibration: SpaceCalibration,
    pub zones: ZoneMap,
    pub presets: PresetTable,
    pub avatar: Skeleton,
    pub aliases: AliasTable,
    pub inputs: Vec<InputDecl>,
    pub puppeteer: Option<ConfigDocument>,
    pub composition: CompositionState,
    pub gates: RoleGates,
    pub stations: StationRegistry,
    pub locomotion_speed: f64,
    pub gamepad: GamepadMapping,
    pub stale_after: f64,
}

impl Default for Scene {
    /// A 25 m square open stage, identity spaces, the neutral rig as avatar
    /// and one mocap stream.
    fn default() -> Self {
        Scene::from_document(SceneDocument::default(), None).expect("the built-in scene is valid")
    }
}

fn parse_gate(name: &str) -> Result<Gate, SceneError> {
    Ok(match name {
        "mode" => Gate::Mode,
        "camera" => Gate::Camera,
        "light" => Gate::Light,
        "pathfind" => Gate::Pathfind,
        "preset" => Gate::Preset,
        "space" => Gate::Space,
        "puppeteer" => Gate::Puppeteer,
        other => return Err(SceneError::Invalid(format!("unknown role gate {other:?}"))),
    })
}

fn parse_role(name: &str) -> Result<Role, SceneError> {
    name.parse()
        .map_err(|e: stage_bus::station::UnknownRole| SceneError::Invalid(e.to_string()))
}

fn parse_regions(names: &[String]) -> Result<RegionSet, SceneError> {
    let mut set = RegionSet::empty();
    for n in names {
        if n == "All" {
            return Ok(RegionSet::all());
        }
        let r: BodyRegion = n
            .parse()
            .map_err(|e: stage_core::puppeteer::PuppeteerError| SceneError::Invalid(e.to_string()))?;
        set.insert(r);
    }
    Ok(set)
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

impl Scene {
    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.to_owned(),
            source,
        })?;
        let doc: SceneDocument = toml::from_str(&text)?;
        Scene::from_document(doc, path.parent())
    }

    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, SceneError> {
        Scene::from_document(toml::from_str(text)?, base)
    }

    /// `base` resolves relative file references.
    pub fn from_document(doc: SceneDocument, base: Option<&Path>) -> Result<Self, SceneError> {
        let version = doc.version.unwrap_or(SCENE_VERSION);
        if version != SCENE_VERSION {
            return Err(SceneError::Version(version));
        }
        let navmesh = build_navmesh(&doc.stage.bounds, &doc.stage.obstacles, doc.stage.cell_size)?;
        doc.space.validate()?;
        let zones = ZoneMap::new(doc.zones)?;
        let mut presets = PresetTable::default();
        for (name, p) in doc.presets {
            if !(p.position.iter().all(|v| v.is_finite()) && p.yaw.is_finite()) {
                return Err(SceneError::Invalid(format!("preset {name:?} is not finite")));
            }
            presets.insert(&name, p)?;
        }

        let avatar = match &doc.avatar.skeleton {
            None => neutral_skeleton(),
            Some(rel) => {
                let path = base.map_or_else(|| rel.clone(), |b| b.join(rel));
                let text = std::fs::read_to_string(&path).map_err(|source| SceneError::Io { path, source })?;
                parse_bvh(&text)
                    .map_err(|e| SceneError::Avatar(e.to_string()))?
                    .skeleton
            }
        };

        let sections = doc.inputs.unwrap_or_else(|| {
            vec![InputSection {
                id: DEFAULT_STREAM.into(),
                kind: InputKindName::Mocap,
                stream: None,
                rig: RigName::Suit,
                regions: all_regions(),
                smoothing: None,
            }]
        });
        let mut inputs: Vec<InputDecl> = Vec::new();
        for s in sections {
            if inputs.iter().any(|i| i.id == s.id) {
                return Err(SceneError::Invalid(format!("duplicate input {:?}", s.id)));
            }
            let kind = match s.kind {
                InputKindName::Mocap => InputSpec::Mocap,
                InputKindName::Replay => InputSpec::Replay,
            };
            let stream = match kind {
                InputSpec::Mocap => Some(s.stream.unwrap_or_else(|| s.id.clone())),
                InputSpec::Replay => None,
            };
            if let Some(st) = &stream {
                if st.is_empty() || st.len() > 8 || !st.bytes().all(|b| b.is_ascii_graphic()) {
                    return Err(SceneError::Invalid(format!(
                        "stream id {st:?} must be 1 to 8 printable characters"
                    )));
                }
                if inputs.iter().any(|i| i.stream.as_deref() == Some(st)) {
                    return Err(SceneError::Invalid(format!("stream {st:?} feeds two inputs")));
                }
            }
            if let Some(a) = s.smoothing {
                if !(a > 0.0 && a <= 1.0) {
                    return Err(SceneError::Invalid(format!("smoothing {a} is outside (0, 1]")));
                }
            }
            inputs.push(InputDecl {
                id: s.id,
                kind,
                stream,
                rig: s.rig,
                regions: parse_regions(&s.regions)?,
                smoothing: s.smoothing,
            });
        }

        let camera = match doc.composition.camera {
            None => Camera::default(),
            Some(c) => Camera {
                position: vec3(c.position),
                yaw: c.yaw,
                pitch: c.pitch,
                fov: c.fov,
            },
        };
        let lights = doc
            .composition
            .lights
            .into_iter()
            .map(|l| Light {
                id: l.id,
                position: vec3(l.position),
                intensity: l.intensity,
            })
            .collect();
        let composition = CompositionState::new(doc.composition.mode, camera, lights)?;

        let mut gates = RoleGates::default();
        for (gate, roles) in &doc.roles {
            let roles = roles.iter().map(|r| parse_role(r)).collect::<Result<_, _>>()?;
            gates.set(parse_gate(gate)?, roles);
        }

        let mut stations = StationRegistry::new();
        for s in &doc.stations {
            stations.insert(StationDescriptor {
                id: s.id,
                role: parse_role(&s.role)?,
                address: s.address.clone(),
            })?;
        }

        let speed = doc.locomotion.speed;
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(SceneError::Invalid(format!(
                "locomotion speed {speed} must be positive"
            )));
        }
        let g = doc.gamepad;
        if !(g.dead_zone >= 0.0 && g.dead_zone < 1.0) {
            return Err(SceneError::Invalid(format!(
                "gamepad dead zone {} is outside [0, 1)",
                g.dead_zone
            )));
        }
        if !(doc.health.stale_after > 0.0) {
            return Err(SceneError::Invalid("health.stale_after must be positive".into()));
        }

        Ok(Scene {
            bounds: doc.stage.bounds,
            obstacles: doc.stage.obstacles,
            navmesh,
            calibration: doc.space,
            zones,
            presets,
            avatar,
            aliases: doc.avatar.aliases,
            inputs,
            puppeteer: doc.puppeteer,
            composition,
            gates,
            stations,
            locomotion_speed: speed,
            gamepad: GamepadMapping {
                speed_mps: g.speed_mps,
                yaw_rate_dps: g.yaw_rate_dps,
                dead_zone: g.dead_zone,
            },
            stale_after: doc.health.stale_after,
        })
    }

    /// Adds a replay input unless one with that id is already declared.
    pub fn ensure_replay_input(&mut self, id: &str) -> Result<(), SceneError> {
        match self.inputs.iter().find(|i| i.id == id) {
            Some(i) if i.kind == InputSpec::Replay => Ok(()),
            Some(_) => Err(SceneError::Invalid(format!("input {id:?} is not a replay input"))),
            None => {
                self.inputs.push(InputDecl {
                    id: id.to_owned(),
                    kind: InputSpec::Replay,
                    stream: None,
                    rig: RigName::Neutral,
                    regions: RegionSet::all(),
                    smoothing: None,
                });
                Ok(())
            }
        }
    }

    /// Floor-plan point of the D-space center of the stage.
    pub fn center(&self) -> Vec2 {
        self.bounds.center()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scene() {
        let s = Scene::default();
        assert_eq!((s.navmesh.width, s.navmesh.height), (100, 100));
        assert_eq!(s.avatar.len(), 23);
        assert_eq!(s.inputs.len(), 1);
        assert_eq!(s.inputs[0].stream.as_deref(), Some(DEFAULT_STREAM));
        assert_eq!(s.composition.mode, Mode::Fixed);
        assert!(s.gates.allows(Gate::Pathfind, Role::Manipulator));
    }

    #[test]
    fn full_document() {
        let text = r#"
version = 1
[stage]
bounds = [0, 0, 10, 8]
cell_size = 0.5
obstacles = [[4, 0, 5, 6]]

[space.b_to_d]
yaw_deg = 90
offset_x = 1

[[zones]]
id = "Phys1"
rect_b = [0, 0, 2, 2]
rect_d = [6, 6, 8, 8]
release_yaw = 45

[presets.Dig2]
position = [7, 2]
yaw = 180

[[inputs]]
id = "neuron1"
kind = "mocap"
stream = "suitA"
smoothing = 0.5

[[inputs]]
id = "take3"
kind = "replay"
rig = "neutral"
regions = ["LeftArm", "RightArm"]

[puppeteer.regions]
All = [{ input = "neuron1" }]
LeftArm = [{ input = "take3" }]

[composition]
mode = "Manipulated"
camera = { position = [0, 2, -5], fov = 50 }
lights = [{ id = "key", position = [0, 4, 0] }]

[roles]
camera = ["Director"]

[[stations]]
id = 2
role = "Director"
address = "127.0.0.1:7400"
"#;
        let s = Scene::parse(text, None).unwrap();
        assert_eq!((s.navmesh.width, s.navmesh.height), (20, 16));
        assert_eq!(s.calibration.b_to_d.yaw_deg, 90.0);
        assert_eq!(s.presets.resolve("Phys1", &s.zones).unwrap().yaw, 45.0);
        assert_eq!(s.presets.resolve("Dig2", &s.zones).unwrap().yaw, 180.0);
        assert_eq!(s.inputs[0].stream.as_deref(), Some("suitA"));
        assert!(s.inputs[1].regions.contains(BodyRegion::LeftArm));
        assert!(!s.inputs[1].regions.contains(BodyRegion::Root));
        assert_eq!(s.composition.camera.fov, 50.0);
        assert!(!s.gates.allows(Gate::Camera, Role::Manipulator));
        assert_eq!(s.stations.role_of(2), Some(Role::Director));
    }

    #[test]
    fn rejections() {
        assert!(matches!(Scene::parse("version = 2", None), Err(SceneError::Version(2))));
        assert!(matches!(
            Scene::parse("[stage]\ncell_size = 0", None),
            Err(SceneError::NavMesh(_))
        ));
        assert!(matches!(Scene::parse("bogus = 1", None), Err(SceneError::Syntax(_))));
        assert!(matches!(
            Scene::parse("[composition]\ncamera = { position = [0, 0, 0], fov = 200 }", None),
            Err(SceneError::Composition(_))
        ));
        assert!(matches!(
            Scene::parse("[roles]\nmode = [\"Janitor\"]", None),
            Err(SceneError::Invalid(_))
        ));
        let two_directors = "[[stations]]\nid = 1\nrole = \"Director\"\n[[stations]]\nid = 2\nrole = \"Director\"";
        assert!(matches!(Scene::parse(two_directors, None), Err(SceneError::Station(_))));
        let long_stream = "[[inputs]]\nid = \"a\"\nkind = \"mocap\"\nstream = \"waytoolongid\"";
        assert!(matches!(Scene::parse(long_stream, None), Err(SceneError::Invalid(_))));
    }
}
