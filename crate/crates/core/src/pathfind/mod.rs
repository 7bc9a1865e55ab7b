//! Grid navmesh over the digital stage, A* search, path following and the
//! handoff of root control between the mocaptor and the pathfinder.

mod astar;
mod control;
mod navmesh;
mod zones;

pub use astar::{find_path, find_path_traced, Path};
pub use control::{
    compose_final_pose, control_transition, step_locomotion, ControlCommand, ControlState, Locomotion, Owner,
    Transition,
};
pub use navmesh::{build_navmesh, NavMesh};
pub use zones::{Preset, PresetTable, Zone, ZoneError, ZoneMap};

use serde::Deserialize;
use thiserror::Error;

use crate::math::Vec2;

pub const DEFAULT_CELL_SIZE: f64 = 0.25;
pub const DEFAULT_SPEED: f64 = 1.2;

/// Axis-aligned floor rectangle, written `[x0, z0, x1, z1]`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(from = "[f64; 4]")]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]))
    }
}

impl Rect {
    /// Corners may be given in any order.
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self {
            min: Vec2::new(a.x.min(b.x), a.y.min(b.y)),
            max: Vec2::new(a.x.max(b.x), a.y.max(b.y)),
        }
    }

    pub fn size(&self) -> Vec2 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn is_degenerate(&self) -> bool {
        let s = self.size();
        !(s.x > 0.0 && s.y > 0.0 && s.x.is_finite() && s.y.is_finite())
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// True when the interiors intersect; shared edges do not count.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x < other.max.x && other.min.x < self.max.x && self.min.y < other.max.y && other.min.y < self.max.y
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),
    #[error("stage bounds are degenerate")]
    DegenerateBounds,
    #[error("no walkable cells")]
    EmptyMesh,
    #[error("endpoint ({x}, {z}) is outside the walkable area")]
    InvalidEndpoint { x: f64, z: f64 },
    #[error("no route between start and goal")]
    NoPath,
}

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("the pathfinder already owns the avatar")]
    AlreadyOwned,
    #[error("operation requires the other owner")]
    WrongOwner,
    #[error("takeover failed: {0}")]
    NoPath(#[from] PathError),
    #[error("speed must be positive, got {0}")]
    InvalidSpeed(f64),
}
