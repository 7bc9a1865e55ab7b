use super::{find_path, ControlError, NavMesh, Path};
use crate::math::{compose, facing_yaw, planar_yaw, wrap_degrees, yaw_rotation, Vec2};
use crate::skeleton::Pose;
use crate::stagespace::Disposition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    MocaptorFull,
    PathfinderLocomotion,
}

impl Owner {
    pub fn name(self) -> &'static str {
        match self {
            Owner::MocaptorFull => "MocaptorFull",
            Owner::PathfinderLocomotion => "PathfinderLocomotion",
        }
    }
}

/// An active walk along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct Locomotion {
    pub path: Path,
    /// Meters covered along the polyline.
    pub progress: f64,
    pub position: Vec2,
    /// Degrees in `(-180, 180]`.
    pub yaw: f64,
    pub speed: f64,
    pub complete: bool,
    length: f64,
}

impl Locomotion {
    pub fn new(path: Path, yaw: f64, speed: f64) -> Self {
        let points: Vec<Vec2> = path.polyline().copied().collect();
        let length = points.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
        let mut loco = Self {
            position: path.start,
            path,
            progress: 0.0,
            yaw: wrap_degrees(yaw),
            speed,
            complete: false,
            length,
        };
        loco.place();
        loco
    }

    /// Arc length of the polyline.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn disposition(&self) -> Disposition {
        Disposition {
            position: self.position,
            yaw: self.yaw,
        }
    }

    fn place(&mut self) {
        let mut walked = 0.0;
        let mut points = self.path.polyline();
        let mut a = *points.next().expect("polyline starts at the start point");
        self.position = a;
        for &b in points {
            let seg = b - a;
            let len = seg.norm();
            if len > 0.0 {
                self.yaw = planar_yaw(&seg);
                let left = self.progress - walked;
                if left < len && self.progress < self.length {
                    self.position = a + seg * (left / len);
                    self.complete = false;
                    return;
                }
                walked += len;
            }
            a = b;
        }
        self.position = a;
        self.complete = true;
    }
}

/// Who drives the avatar root. The path exists exactly while the pathfinder
/// owns the avatar.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ControlState {
    #[default]
    MocaptorFull,
    PathfinderLocomotion(Locomotion),
}

impl ControlState {
    pub fn owner(&self) -> Owner {
        match self {
            ControlState::MocaptorFull => Owner::MocaptorFull,
            ControlState::PathfinderLocomotion(_) => Owner::PathfinderLocomotion,
        }
    }

    pub fn active_path(&self) -> Option<&Path> {
        self.locomotion().map(|l| &l.path)
    }

    pub fn locomotion(&self) -> Option<&Locomotion> {
        match self {
            ControlState::MocaptorFull => None,
            ControlState::PathfinderLocomotion(l) => Some(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlCommand {
    TakeOver {
        goal: Vec2,
        speed: f64,
    },
    /// `landing` is the resolved preset, if one was named.
    Release {
        landing: Option<Disposition>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: ControlState,
    /// Where the avatar must stand once the mocaptor has it back.
    pub landing: Option<Disposition>,
}

/// Applies one manipulator command. `avatar` is where the avatar currently
/// stands in D.
pub fn control_transition(
    state: &ControlState,
    command: &ControlCommand,
    mesh: &NavMesh,
    avatar: &Disposition,
) -> Result<Transition, ControlError> {
    match (state, command) {
        (ControlState::MocaptorFull, ControlCommand::TakeOver { goal, speed }) => {
            if !(*speed > 0.0 && speed.is_finite()) {
                return Err(ControlError::InvalidSpeed(*speed));
            }
            let path = find_path(mesh, &avatar.position, goal)?;
            Ok(Transition {
                state: ControlState::PathfinderLocomotion(Locomotion::new(path, avatar.yaw, *speed)),
                landing: None,
            })
        }
        (ControlState::PathfinderLocomotion(_), ControlCommand::TakeOver { .. }) => Err(ControlError::AlreadyOwned),
        (ControlState::PathfinderLocomotion(loco), ControlCommand::Release { landing }) => Ok(Transition {
            state: ControlState::MocaptorFull,
            landing: Some(landing.unwrap_or_else(|| loco.disposition())),
        }),
        (ControlState::MocaptorFull, ControlCommand::Release { .. }) => Err(ControlError::WrongOwner),
    }
}

/// Advances the walk by `speed · dt` meters. Reaching the end raises
/// `complete`; ownership stays with the pathfinder until released.
pub fn step_locomotion(state: &ControlState, speed: f64, dt: f64) -> Result<(ControlState, Vec2, f64), ControlError> {
    let ControlState::PathfinderLocomotion(loco) = state else {
        return Err(ControlError::WrongOwner);
    };
    let mut next = loco.clone();
    next.progress = (loco.progress + speed * dt).clamp(0.0, loco.length);
    next.place();
    let (position, yaw) = (next.position, next.yaw);
    Ok((ControlState::PathfinderLocomotion(next), position, yaw))
}

/// Final pose in D. While the pathfinder drives, the root's floor position
/// and facing come from `locomotion`; height, root tilt and every other joint
/// stay with the mocaptor.
pub fn compose_final_pose(state: &ControlState, mocaptor_pose: &Pose, locomotion: &Disposition) -> Pose {
    if state.owner() == Owner::MocaptorFull {
        return mocaptor_pose.clone();
    }
    let mut out = mocaptor_pose.clone();
    out.root_translation.x = locomotion.position.x;
    out.root_translation.z = locomotion.position.y;
    let root = &mocaptor_pose.local_rotations[0];
    let turn = wrap_degrees(locomotion.yaw - facing_yaw(root));
    if turn != 0.0 {
        out.local_rotations[0] = compose(&yaw_rotation(turn), root);
    }
    out
}
