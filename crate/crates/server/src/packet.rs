//! Per-tick output packets and the length-prefixed packet log.

use std::io::{self, Read, Write};

use stage_bus::{decode_value, encode_value, CodecError, Value};
use stage_core::pathfind::Owner;
use stage_core::puppeteer::BodyRegion;
use stage_core::stagespace::Disposition;
use stage_core::{Pose, Vec2};
use thiserror::Error;

use crate::composition::CompositionState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Health {
    /// New data arrived recently.
    Fresh,
    /// Data exists but nothing new arrived for a while.
    Stale,
    /// No data ever arrived.
    Missing,
}

impl Health {
    pub fn name(self) -> &'static str {
        match self {
            Health::Fresh => "fresh",
            Health::Stale => "stale",
            Health::Missing => "missing",
        }
    }
}

/// Where a command came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Script,
    Station { sender: u32, seq: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub origin: Origin,
    pub command: String,
    pub result: Result<(), String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    pub walked: f64,
    pub length: f64,
    pub complete: bool,
    pub waypoints: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePacket {
    pub tick: u64,
    pub time: f64,
    /// Avatar pose in D, on the avatar rig.
    pub pose: Pose,
    pub owner: Owner,
    pub disposition: Disposition,
    pub composition: CompositionState,
    pub health: Vec<(String, Health)>,
    pub degraded: Vec<BodyRegion>,
    pub outcomes: Vec<CommandOutcome>,
    pub progress: Option<Progress>,
}

fn f32s(values: impl IntoIterator<Item = f64>) -> Value {
    Value::Float32Array(values.into_iter().map(|v| v as f32).collect())
}

fn indexed(items: impl IntoIterator<Item = Value>) -> Value {
    Value::map(items.into_iter().enumerate().map(|(i, v)| (format!("{i:04}"), v)))
}

impl FramePacket {
    /// Boxed form. The pose, `[w x y z]` per joint then the root
    /// translation, is included only on request.
    pub fn to_value(&self, include_pose: bool) -> Value {
        let c = &self.composition;
        let cam = &c.camera;
        let mut fields = vec![
            ("tick", Value::Int64(self.tick as i64)),
            ("time", Value::Float64(self.time)),
            ("owner", Value::from(self.owner.name())),
            (
                "disposition",
                Value::map([
                    ("x", Value::Float64(self.disposition.position.x)),
                    ("z", Value::Float64(self.disposition.position.y)),
                    ("yaw", Value::Float64(self.disposition.yaw)),
                ]),
            ),
            (
                "composition",
                Value::map([
                    ("mode", Value::from(c.mode.name())),
                    (
                        "camera",
                        Value::map([
                            ("x", Value::Float64(cam.position.x)),
                            ("y", Value::Float64(cam.position.y)),
                            ("z", Value::Float64(cam.position.z)),
                            ("yaw", Value::Float64(cam.yaw)),
                            ("pitch", Value::Float64(cam.pitch)),
                            ("fov", Value::Float64(cam.fov)),
                        ]),
                    ),
                    (
                        "lights",
                        Value::map(c.lights.iter().map(|l| {
                            (
                                l.id.clone(),
                                Value::map([
                                    ("x", Value::Float64(l.position.x)),
                                    ("y", Value::Float64(l.position.y)),
                                    ("z", Value::Float64(l.position.z)),
                                    ("intensity", Value::Float64(l.intensity)),
                                ]),
                            )
                        })),
                    ),
                ]),
            ),
            (
                "health",
                Value::map(self.health.iter().map(|(id, h)| (id.clone(), Value::from(h.name())))),
            ),
            (
                "degraded",
                Value::map(self.degraded.iter().map(|r| (r.name(), Value::Bool(true)))),
            ),
        ];
        if !self.outcomes.is_empty() {
            let outcomes = self.outcomes.iter().map(|o| {
                let mut m = vec![
                    ("command", Value::from(o.command.as_str())),
                    ("ok", Value::Bool(o.result.is_ok())),
                ];
                match o.origin {
                    Origin::Script => m.push(("source", Value::from("script"))),
                    Origin::Station { sender, seq } => {
                        m.push(("source", Value::from("station")));
                        m.push(("sender", Value::Int64(i64::from(sender))));
                        m.push(("seq", Value::Int64(seq as i64)));
                    }
                }
                if let Err(e) = &o.result {
                    m.push(("error", Value::from(e.as_str())));
                }
                Value::map(m)
            });
            fields.push(("outcomes", indexed(outcomes)));
        }
        if let Some(p) = &self.progress {
            fields.push((
                "path",
                Value::map([
                    ("walked", Value::Float64(p.walked)),
                    ("length", Value::Float64(p.length)),
                    ("complete", Value::Bool(p.complete)),
                    ("waypoints", f32s(p.waypoints.iter().flat_map(|w| [w.x, w.y]))),
                ]),
            ));
        }
        if include_pose {
            let pose = &self.pose;
            let values = pose
                .local_rotations
                .iter()
                .flat_map(|q| [q.w, q.i, q.j, q.k])
                .chain(pose.root_translation.iter().copied());
            fields.push(("pose", f32s(values)));
        }
        Value::map(fields)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("packet {index}: {source}")]
    Codec { index: usize, source: CodecError },
    #[error("log ends inside packet {0}")]
    Truncated(usize),
}

/// Appends `u32` little-endian length + encoded packet records.
pub struct PacketLog<W: Write> {
    out: W,
    written: u64,
}

impl<W: Write> PacketLog<W> {
    pub fn new(out: W) -> Self {
        Self { out, written: 0 }
    }

    pub fn append(&mut self, packet: &FramePacket) -> Result<(), LogError> {
        let bytes = encode_value(&packet.to_value(true)).map_err(|source| LogError::Codec {
            index: self.written as usize,
            source,
        })?;
        let len = u32::try_from(bytes.len()).map_err(|_| LogError::Codec {
            index: self.written as usize,
            source: CodecError::TooLong(bytes.len()),
        })?;
        self.out.write_all(&len.to_le_bytes())?;
        self.out.write_all(&bytes)?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn into_inner(mut self) -> Result<W, LogError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads every record of a packet log.
pub fn read_packet_log(mut input: impl Read) -> Result<Vec<Value>, LogError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let index = out.len();
        let head = bytes.get(at..at + 4).ok_or(LogError::Truncated(index))?;
        let len = u32::from_le_bytes(head.try_into().expect("four bytes")) as usize;
        let body = bytes.get(at + 4..at + 4 + len).ok_or(LogError::Truncated(index))?;
        out.push(decode_value(body).map_err(|source| LogError::Codec { index, source })?);
        at += 4 + len;
    }
    Ok(out)
}
