//! Manipulator commands, their bus payloads and the tick-indexed script
//! format.
//!
//! Script lines read `<tick> <command> <args...>`; `#` starts a comment.
//!
//! | command | arguments |
//! |---|---|
//! | `takeover` | `x z [speed]` |
//! | `takeover-zone` | `zone [speed]` |
//! | `release` | `[preset or zone]` |
//! | `preset` | `name` |
//! | `rotate-space` | `degrees` |
//! | `ref-move` | `dx dz [yaw]` |
//! | `calibrate` | `scale yaw offset_x offset_z` |
//! | `actor-pos` | `x z [face]` |
//! | `face-actor` | |
//! | `gamepad` | `left_x left_y right_x` |
//! | `mode` | `Fixed` or `Manipulated` |
//! | `camera` | `dx [dy dz yaw pitch fov]` |
//! | `light` | `id intensity [x y z]` |

use std::collections::BTreeMap;
use std::fmt;

use stage_bus::{topics, Role, Value};
use stage_core::puppeteer::{ConfigDocument, GamepadAxes, RouteEntry};
use stage_core::stagespace::Similarity2;
use stage_core::{Vec2, Vec3};
use thiserror::Error;

use crate::composition::{CameraDelta, LightChange, Mode};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    TakeOver { goal: Vec2, speed: Option<f64> },
    TakeOverZone { zone: String, speed: Option<f64> },
    Release { preset: Option<String> },
    ApplyPreset { name: String },
    RotateSpace { degrees: f64 },
    RefMove { translation: Vec2, yaw: f64 },
    SetCalibration(Similarity2),
    ActorPosition { position: Vec2, face: bool },
    FaceActor,
    Gamepad(GamepadAxes),
    SetMode(Mode),
    MoveCamera(CameraDelta),
    SetLight(LightChange),
    Puppeteer(ConfigDocument),
}

/// Command families that role gates are written against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gate {
    Mode,
    Camera,
    Light,
    Pathfind,
    Preset,
    Space,
    Puppeteer,
}

impl Command {
    pub fn gate(&self) -> Gate {
        match self {
            Command::TakeOver { .. } | Command::TakeOverZone { .. } | Command::Release { .. } => Gate::Pathfind,
            Command::ApplyPreset { .. } => Gate::Preset,
            Command::RotateSpace { .. }
            | Command::RefMove { .. }
            | Command::SetCalibration(_)
            | Command::ActorPosition { .. }
            | Command::FaceActor
            | Command::Gamepad(_) => Gate::Space,
            Command::SetMode(_) => Gate::Mode,
            Command::MoveCamera(_) => Gate::Camera,
            Command::SetLight(_) => Gate::Light,
            Command::Puppeteer(_) => Gate::Puppeteer,
        }
    }

    /// Commands that change who drives the avatar root. At most one runs
    /// per tick.
    pub fn is_transition(&self) -> bool {
        matches!(
            self,
            Command::TakeOver { .. }
                | Command::TakeOverZone { .. }
                | Command::Release { .. }
                | Command::ApplyPreset { .. }
        )
    }
}

/// Who may issue which command family.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleGates {
    gates: BTreeMap<Gate, Vec<Role>>,
}

impl Default for RoleGates {
    fn default() -> Self {
        use Role::*;
        let gates = [
            (Gate::Mode, vec![Director, DigitalArtist]),
            (Gate::Camera, vec![Director, DigitalArtist, Manipulator]),
            (Gate::Light, vec![Director, DigitalArtist, Manipulator]),
            (Gate::Pathfind, vec![Manipulator]),
            (Gate::Preset, vec![Manipulator]),
            (Gate::Space, vec![Manipulator]),
            (Gate::Puppeteer, vec![Manipulator, Director]),
        ];
        Self {
            gates: gates.into_iter().collect(),
        }
    }
}

impl RoleGates {
    pub fn set(&mut self, gate: Gate, roles: Vec<Role>) {
        self.gates.insert(gate, roles);
    }

    pub fn allows(&self, gate: Gate, role: Role) -> bool {
        self.gates.get(&gate).is_some_and(|r| r.contains(&role))
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |s: &Option<f64>| s.map(|v| format!(" {}", num(v))).unwrap_or_default();
        match self {
            Command::TakeOver { goal, speed } => write!(f, "takeover {} {}{}", num(goal.x), num(goal.y), opt(speed)),
            Command::TakeOverZone { zone, speed } => write!(f, "takeover-zone {zone}{}", opt(speed)),
            Command::Release { preset: Some(p) } => write!(f, "release {p}"),
            Command::Release { preset: None } => write!(f, "release"),
            Command::ApplyPreset { name } => write!(f, "preset {name}"),
            Command::RotateSpace { degrees } => write!(f, "rotate-space {}", num(*degrees)),
            Command::RefMove { translation, yaw } => {
                write!(
                    f,
                    "ref-move {} {} {}",
                    num(translation.x),
                    num(translation.y),
                    num(*yaw)
                )
            }
            Command::SetCalibration(s) => write!(
                f,
                "calibrate {} {} {} {}",
                num(s.scale),
                num(s.yaw_deg),
                num(s.offset_x),
                num(s.offset_z)
            ),
            Command::ActorPosition { position, face } => {
                write!(f, "actor-pos {} {}", num(position.x), num(position.y))?;
                if *face {
                    write!(f, " face")?;
                }
                Ok(())
            }
            Command::FaceActor => write!(f, "face-actor"),
            Command::Gamepad(a) => write!(f, "gamepad {} {} {}", num(a.left_x), num(a.left_y), num(a.right_x)),
            Command::SetMode(m) => write!(f, "mode {m}"),
            Command::MoveCamera(d) => write!(
                f,
                "camera {} {} {} {} {} {}",
                num(d.position.x),
                num(d.position.y),
                num(d.position.z),
                num(d.yaw),
                num(d.pitch),
                num(d.fov)
            ),
            Command::SetLight(l) => {
                write!(f, "light {}", l.id)?;
                if let Some(i) = l.intensity {
                    write!(f, " {}", num(i))?;
                }
                if let Some(p) = l.position {
                    write!(f, " {} {} {}", num(p.x), num(p.y), num(p.z))?;
                }
                Ok(())
            }
            Command::Puppeteer(_) => write!(f, "puppeteer"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CommandError {
    #[error("line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("topic {topic}: {message}")]
    Payload { topic: String, message: String },
    #[error("topic {0} carries no command")]
    NotACommand(String),
}

fn parse_words(words: &[&str]) -> Result<Command, String> {
    let (name, args) = words.split_first().ok_or("missing command")?;
    let f = |i: usize| -> Result<f64, String> {
        let w = args
            .get(i)
            .ok_or_else(|| format!("{name}: missing argument {}", i + 1))?;
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("{name}: {w:?} is not a finite number")),
        }
    };
    let opt_f = |i: usize| -> Result<Option<f64>, String> {
        if i < args.len() {
            f(i).map(Some)
        } else {
            Ok(None)
        }
    };
    let arity = |min: usize, max: usize| -> Result<(), String> {
        if args.len() < min || args.len() > max {
            Err(format!("{name}: expected {min} to {max} arguments, got {}", args.len()))
        } else {
            Ok(())
        }
    };
    let cmd = match *name {
        "takeover" => {
            arity(2, 3)?;
            Command::TakeOver {
                goal: Vec2::new(f(0)?, f(1)?),
                speed: opt_f(2)?,
            }
        }
        "takeover-zone" => {
            arity(1, 2)?;
            Command::TakeOverZone {
                zone: args[0].to_owned(),
                speed: opt_f(1)?,
            }
        }
        "release" => {
            arity(0, 1)?;
            Command::Release {
                preset: args.first().map(|s| s.to_string()),
            }
        }
        "preset" => {
            arity(1, 1)?;
            Command::ApplyPreset {
                name: args[0].to_owned(),
            }
        }
        "rotate-space" => {
            arity(1, 1)?;
            Command::RotateSpace { degrees: f(0)? }
        }
        "ref-move" => {
            arity(2, 3)?;
            Command::RefMove {
                translation: Vec2::new(f(0)?, f(1)?),
                yaw: opt_f(2)?.unwrap_or(0.0),
            }
        }
        "calibrate" => {
            arity(4, 4)?;
            let s = Similarity2::new(f(0)?, f(1)?, Vec2::new(f(2)?, f(3)?)).map_err(|e| e.to_string())?;
            Command::SetCalibration(s)
        }
        "actor-pos" => {
            arity(2, 3)?;
            let face = match args.get(2) {
                None => false,
                Some(&"face") => true,
                Some(w) => return Err(format!("actor-pos: unexpected {w:?}")),
            };
            Command::ActorPosition {
                position: Vec2::new(f(0)?, f(1)?),
                face,
            }
        }
        "face-actor" => {
            arity(0, 0)?;
            Command::FaceActor
        }
        "gamepad" => {
            arity(3, 3)?;
            Command::Gamepad(GamepadAxes {
                left_x: f(0)?,
                left_y: f(1)?,
                right_x: f(2)?,
            })
        }
        "mode" => {
            arity(1, 1)?;
            Command::SetMode(
                args[0]
                    .parse()
                    .map_err(|e: crate::composition::CompositionError| e.to_string())?,
            )
        }
        "camera" => {
            arity(1, 6)?;
            let g = |i| opt_f(i).map(|v| v.unwrap_or(0.0));
            Command::MoveCamera(CameraDelta {
                position: Vec3::new(f(0)?, g(1)?, g(2)?),
                yaw: g(3)?,
                pitch: g(4)?,
                fov: g(5)?,
            })
        }
        "light" => {
            if args.len() != 2 && args.len() != 5 {
                return Err(format!("light: expected 2 or 5 arguments, got {}", args.len()));
            }
            Command::SetLight(LightChange {
                id: args[0].to_owned(),
                intensity: Some(f(1)?),
                position: if args.len() == 5 {
                    Some(Vec3::new(f(2)?, f(3)?, f(4)?))
                } else {
                    None
                },
            })
        }
        other => return Err(format!("unknown command {other:?}")),
    };
    Ok(cmd)
}

/// Parses one command without its tick, e.g. `takeover 3 4`.
pub fn parse_command(text: &str) -> Result<Command, String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    parse_words(&words)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEntry {
    pub tick: u64,
    pub command: Command,
}

/// Parses a script. Entries come back ordered by tick, keeping file order
/// within a tick.
pub fn parse_script(text: &str) -> Result<Vec<ScriptEntry>, CommandError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        let err = |message: String| CommandError::Script { line: i + 1, message };
        let tick = words[0]
            .parse::<u64>()
            .map_err(|_| err(format!("{:?} is not a tick index", words[0])))?;
        let command = parse_words(&words[1..]).map_err(err)?;
        out.push(ScriptEntry { tick, command });
    }
    out.sort_by_key(|e| e.tick);
    Ok(out)
}

fn field_f64(payload: &Value, key: &str) -> Result<Option<f64>, String> {
    match payload.get(key) {
        None => Ok(None),
        Some(v) => match v.as_f64() {
            Some(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(format!("field {key:?} must be a finite number")),
        },
    }
}

fn need_f64(payload: &Value, key: &str) -> Result<f64, String> {
    field_f64(payload, key)?.ok_or_else(|| format!("missing field {key:?}"))
}

fn field_str<'a>(payload: &'a Value, key: &str) -> Result<Option<&'a str>, String> {
    match payload.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_str()
            .map(Some)
            .ok_or_else(|| format!("field {key:?} must be a string")),
    }
}

fn need_str<'a>(payload: &'a Value, key: &str) -> Result<&'a str, String> {
    field_str(payload, key)?.ok_or_else(|| format!("missing field {key:?}"))
}

/// Reads the command carried by a bus event.
pub fn command_from_event(topic: &str, payload: &Value) -> Result<Command, CommandError> {
    let wrap = |message: String| CommandError::Payload {
        topic: topic.to_owned(),
        message,
    };
    let p = payload;
    let cmd = match topic {
        topics::PATHFIND_TAKEOVER => match field_str(p, "zone").map_err(wrap)? {
            Some(zone) => Command::TakeOverZone {
                zone: zone.to_owned(),
                speed: field_f64(p, "speed").map_err(wrap)?,
            },
            None => Command::TakeOver {
                goal: Vec2::new(need_f64(p, "x").map_err(wrap)?, need_f64(p, "z").map_err(wrap)?),
                speed: field_f64(p, "speed").map_err(wrap)?,
            },
        },
        topics::PATHFIND_RELEASE => Command::Release {
            preset: field_str(p, "preset").map_err(wrap)?.map(str::to_owned),
        },
        topics::PRESET_APPLY => Command::ApplyPreset {
            name: need_str(p, "name").map_err(wrap)?.to_owned(),
        },
        topics::SPACE_CALIBRATION => space_command(p).map_err(wrap)?,
        topics::SPACE_ACTOR_POS => Command::ActorPosition {
            position: Vec2::new(need_f64(p, "x").map_err(wrap)?, need_f64(p, "z").map_err(wrap)?),
            face: p.get("face").and_then(Value::as_bool).unwrap_or(false),
        },
        topics::COMPOSITION_MODE => Command::SetMode(
            need_str(p, "mode")
                .map_err(wrap)?
                .parse()
                .map_err(|e: crate::composition::CompositionError| wrap(e.to_string()))?,
        ),
        topics::COMPOSITION_CAMERA => {
            let g = |k| field_f64(p, k).map(|v| v.unwrap_or(0.0)).map_err(wrap);
            Command::MoveCamera(CameraDelta {
                position: Vec3::new(g("dx")?, g("dy")?, g("dz")?),
                yaw: g("dyaw")?,
                pitch: g("dpitch")?,
                fov: g("dfov")?,
            })
        }
        topics::COMPOSITION_LIGHT => {
            let coords = ["x", "y", "z"]
                .iter()
                .map(|k| field_f64(p, k))
                .collect::<Result<Vec<_>, _>>()
                .map_err(wrap)?;
            let position = match coords.as_slice() {
                [Some(x), Some(y), Some(z)] => Some(Vec3::new(*x, *y, *z)),
                [None, None, None] => None,
                _ => return Err(wrap("light position needs x, y and z".into())),
            };
            Command::SetLight(LightChange {
                id: need_str(p, "id").map_err(wrap)?.to_owned(),
                position,
                intensity: field_f64(p, "intensity").map_err(wrap)?,
            })
        }
        topics::PUPPETEER_CONFIG => Command::Puppeteer(puppeteer_document(p).map_err(wrap)?),
        other => return Err(CommandError::NotACommand(other.to_owned())),
    };
    Ok(cmd)
}

fn space_command(p: &Value) -> Result<Command, String> {
    if let Some(deg) = field_f64(p, "rotate")? {
        return Ok(Command::RotateSpace { degrees: deg });
    }
    if let Some(axes) = p.get("gamepad") {
        let a = axes
            .as_f32s()
            .filter(|a| a.len() == 3)
            .ok_or("gamepad must hold three axes")?;
        return Ok(Command::Gamepad(GamepadAxes {
            left_x: f64::from(a[0]),
            left_y: f64::from(a[1]),
            right_x: f64::from(a[2]),
        }));
    }
    if p.get("scale").is_some() {
        let s = Similarity2::new(
            need_f64(p, "scale")?,
            field_f64(p, "yaw")?.unwrap_or(0.0),
            Vec2::new(
                field_f64(p, "offset_x")?.unwrap_or(0.0),
                field_f64(p, "offset_z")?.unwrap_or(0.0),
            ),
        )
        .map_err(|e| e.to_string())?;
        return Ok(Command::SetCalibration(s));
    }
    if p.get("dx").is_some() || p.get("dz").is_some() || p.get("yaw").is_some() {
        return Ok(Command::RefMove {
            translation: Vec2::new(field_f64(p, "dx")?.unwrap_or(0.0), field_f64(p, "dz")?.unwrap_or(0.0)),
            yaw: field_f64(p, "yaw")?.unwrap_or(0.0),
        });
    }
    if p.get("face").and_then(Value::as_bool) == Some(true) {
        return Ok(Command::FaceActor);
    }
    Err("expected rotate, gamepad, scale, dx/dz/yaw or face".into())
}

fn puppeteer_document(p: &Value) -> Result<ConfigDocument, String> {
    let regions = p
        .get("regions")
        .and_then(Value::as_map)
        .ok_or("missing map \"regions\"")?;
    let mut doc = ConfigDocument {
        regions: BTreeMap::new(),
    };
    for (region, sources) in regions {
        let sources = sources
            .as_map()
            .ok_or_else(|| format!("region {region:?} must map inputs to weights"))?;
        let entries = sources
            .iter()
            .map(|(input, w)| {
                w.as_f64()
                    .map(|weight| RouteEntry {
                        input: input.clone(),
                        weight,
                    })
                    .ok_or_else(|| format!("weight of {input:?} must be a number"))
            })
            .collect::<Result<_, _>>()?;
        doc.regions.insert(region.clone(), entries);
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_round_trip() {
        let text = "\
# opening
0 mode Manipulated
100 takeover 3.5 -2 1.5
100 camera 0 0 0 10
400 release Dig2   # land on the preset
12 light key 0.5 1 4 0
";
        let entries = parse_script(text).unwrap();
        let ticks: Vec<u64> = entries.iter().map(|e| e.tick).collect();
        assert_eq!(ticks, [0, 12, 100, 100, 400]);
        assert_eq!(
            entries[2].command,
            Command::TakeOver {
                goal: Vec2::new(3.5, -2.0),
                speed: Some(1.5)
            }
        );
        assert!(matches!(&entries[3].command, Command::MoveCamera(d) if d.yaw == 10.0));
        for e in &entries {
            assert_eq!(parse_command(&e.command.to_string()).unwrap(), e.command);
        }
    }

    #[test]
    fn script_errors() {
        assert_eq!(
            parse_script("5 takeover 1\n"),
            Err(CommandError::Script {
                line: 1,
                message: "takeover: expected 2 to 3 arguments, got 1".into()
            })
        );
        assert!(matches!(
            parse_script("x mode Fixed"),
            Err(CommandError::Script { line: 1, .. })
        ));
        assert!(matches!(
            parse_script("\n\n3 dance"),
            Err(CommandError::Script { line: 3, .. })
        ));
        assert!(parse_script("1 rotate-space inf").is_err());
        assert!(parse_script("1 calibrate 0 0 0 0").is_err());
    }

    #[test]
    fn events() {
        let takeover = Value::map([("x", Value::Float64(2.0)), ("z", Value::Int64(3))]);
        assert_eq!(
            command_from_event(topics::PATHFIND_TAKEOVER, &takeover).unwrap(),
            Command::TakeOver {
                goal: Vec2::new(2.0, 3.0),
                speed: None
            }
        );
        let release = Value::map([("preset", Value::from("Dig2"))]);
        assert_eq!(
            command_from_event(topics::PATHFIND_RELEASE, &release).unwrap(),
            Command::Release {
                preset: Some("Dig2".into())
            }
        );
        let empty = Value::map::<String>([]);
        assert_eq!(
            command_from_event(topics::PATHFIND_RELEASE, &empty).unwrap(),
            Command::Release { preset: None }
        );
        let rotate = Value::map([("rotate", Value::Float64(15.0))]);
        assert_eq!(
            command_from_event(topics::SPACE_CALIBRATION, &rotate).unwrap(),
            Command::RotateSpace { degrees: 15.0 }
        );
        let mode = Value::map([("mode", Value::from("Fixed"))]);
        assert_eq!(
            command_from_event(topics::COMPOSITION_MODE, &mode).unwrap(),
            Command::SetMode(Mode::Fixed)
        );
        let routes = Value::map([(
            "regions",
            Value::map([("All", Value::map([("replay", Value::Float64(1.0))]))]),
        )]);
        let Command::Puppeteer(doc) = command_from_event(topics::PUPPETEER_CONFIG, &routes).unwrap() else {
            panic!("expected a puppeteer config");
        };
        assert_eq!(doc.regions["All"][0].input, "replay");

        assert!(matches!(
            command_from_event(topics::PATHFIND_TAKEOVER, &empty),
            Err(CommandError::Payload { .. })
        ));
        assert_eq!(
            command_from_event(topics::TICK_FRAME, &empty),
            Err(CommandError::NotACommand(topics::TICK_FRAME.into()))
        );
    }

    #[test]
    fn default_gates() {
        let g = RoleGates::default();
        assert!(g.allows(Gate::Mode, Role::Director));
        assert!(!g.allows(Gate::Mode, Role::Mocaptor));
        assert!(g.allows(Gate::Pathfind, Role::Manipulator));
        assert!(!g.allows(Gate::Pathfind, Role::Director));
        assert!(g.allows(Gate::Camera, Role::DigitalArtist));
    }
}
