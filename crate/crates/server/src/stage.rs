//! The fixed-rate tick pipeline.
//!
//! Each tick: take the newest device frames and replay samples, smooth and
//! retarget them to the neutral rig, blend, retarget to the avatar, fold
//! gamepad nudges into the space correction, run commands, advance
//! locomotion, place the pose in D and emit one [`FramePacket`].

use std::collections::VecDeque;
use std::sync::Arc;

use stage_bus::Role;
use stage_core::capture::{
    sample_clip, smooth, suit_skeleton, DeviceFrame, FrameMailbox, MailboxStats, MotionClip, SmootherState,
};
use stage_core::math::facing_yaw;
use stage_core::pathfind::{
    compose_final_pose, control_transition, step_locomotion, ControlCommand, ControlState, Owner,
};
use stage_core::puppeteer::{
    Blender, GamepadAxes, InputData, InputHandle, InputKind, InputRegistry, PuppeteerConfig, PuppeteerError, RefMove,
};
use stage_core::retarget::{retarget, AliasTable, RetargetError, RetargetProfile};
use stage_core::stagespace::{
    disposition_correction, map_point_a_to_d, map_pose_b_to_d, root_planar, solve_disposition, Disposition,
    SpaceCalibration, SpaceCorrection,
};
use stage_core::{neutral_skeleton, Pose, Vec2};
use thiserror::Error;

use crate::command::{Command, ScriptEntry};
use crate::composition::CompositionState;
use crate::packet::{CommandOutcome, FramePacket, Health, Origin, Progress};
use crate::scene::{InputSpec, RigName, Scene};

pub const MIN_TICK_RATE: f64 = 10.0;
pub const MAX_TICK_RATE: f64 = 240.0;
pub const DEFAULT_TICK_RATE: f64 = 60.0;

#[derive(Debug, Error)]
pub enum StageError {
    #[error("tick rate {0} Hz is outside [10, 240]")]
    TickRate(f64),
    #[error("puppeteer: {0}")]
    Puppeteer(#[from] PuppeteerError),
    #[error("retarget: {0}")]
    Retarget(#[from] RetargetError),
    #[error("no replay input named {0:?}")]
    UnknownReplay(String),
    #[error("replay clip has no frames")]
    EmptyClip,
}

/// A command from outside the script. `role` is `None` for trusted local
/// callers.
#[derive(Debug, Clone, PartialEq)]
pub struct Incoming {
    pub origin: Origin,
    pub role: Option<Role>,
    pub command: Result<Command, String>,
}

impl Incoming {
    pub fn trusted(command: Command) -> Self {
        Self {
            origin: Origin::Script,
            role: None,
            command: Ok(command),
        }
    }
}

enum Feed {
    Device {
        stream: String,
        mailbox: Arc<FrameMailbox>,
        alpha: Option<f64>,
        smoother: Option<SmootherState>,
        to_neutral: RetargetProfile,
    },
    Replay {
        clip: Option<(MotionClip, RetargetProfile)>,
    },
}

struct Source {
    id: String,
    handle: InputHandle,
    feed: Feed,
    last_update: Option<u64>,
    rejected: u64,
}

pub struct Stage {
    scene: Scene,
    dt: f64,
    tick: u64,
    registry: InputRegistry,
    sources: Vec<Source>,
    config: PuppeteerConfig,
    blender: Blender,
    aliases: AliasTable,
    to_avatar: RetargetProfile,
    control: ControlState,
    correction: SpaceCorrection,
    calibration: SpaceCalibration,
    actor: Option<Vec2>,
    gamepad: GamepadAxes,
    composition: CompositionState,
    deferred: VecDeque<Incoming>,
    script: VecDeque<ScriptEntry>,
}

fn device_pose(frame: &DeviceFrame) -> Pose {
    Pose {
        local_rotations: frame.local_rotations.clone(),
        root_translation: frame.root_translation,
        timestamp: frame.timestamp,
    }
}

impl Stage {
    pub fn new(scene: Scene, tick_rate: f64) -> Result<Self, StageError> {
        if !(MIN_TICK_RATE..=MAX_TICK_RATE).contains(&tick_rate) {
            return Err(StageError::TickRate(tick_rate));
        }
        let neutral = neutral_skeleton();
        let aliases = AliasTable::common().merged(&scene.aliases);
        let to_avatar = RetargetProfile::between(&neutral, &scene.avatar, &aliases)?;

        let mut registry = InputRegistry::new();
        let mut sources = Vec::new();
        for decl in &scene.inputs {
            let kind = match decl.kind {
                InputSpec::Mocap => InputKind::MocapStream,
                InputSpec::Replay => InputKind::Replay,
            };
            let handle = registry.register_input(&decl.id, kind, decl.regions)?;
            let feed = match decl.kind {
                InputSpec::Mocap => Feed::Device {
                    stream: decl.stream.clone().unwrap_or_else(|| decl.id.clone()),
                    mailbox: Arc::new(FrameMailbox::new()),
                    alpha: decl.smoothing,
                    smoother: None,
                    to_neutral: match decl.rig {
                        RigName::Suit => RetargetProfile::between(&suit_skeleton(), &neutral, &AliasTable::common())?,
                        RigName::Neutral => RetargetProfile::identity(&neutral),
                    },
                },
                InputSpec::Replay => Feed::Replay { clip: None },
            };
            sources.push(Source {
                id: decl.id.clone(),
                handle,
                feed,
                last_update: None,
                rejected: 0,
            });
        }

        let config = match &scene.puppeteer {
            Some(doc) => PuppeteerConfig::from_document(doc, &registry)?,
            None => {
                let pick = scene
                    .inputs
                    .iter()
                    .find(|i| i.kind == InputSpec::Replay)
                    .or_else(|| scene.inputs.first());
                match pick {
                    Some(i) => PuppeteerConfig::single(&i.id, &registry)?,
                    None => PuppeteerConfig::default(),
                }
            }
        };

        Ok(Self {
            dt: 1.0 / tick_rate,
            tick: 0,
            registry,
            sources,
            config,
            blender: Blender::new(Pose::rest(&neutral)),
            aliases,
            to_avatar,
            control: ControlState::MocaptorFull,
            correction: SpaceCorrection::default(),
            calibration: scene.calibration,
            actor: None,
            gamepad: GamepadAxes::default(),
            composition: scene.composition.clone(),
            deferred: VecDeque::new(),
            script: VecDeque::new(),
            scene,
        })
    }

    /// Plays `clip` through the replay input `id`, starting at tick 0.
    pub fn attach_replay(&mut self, id: &str, clip: MotionClip) -> Result<(), StageError> {
        if clip.frames.is_empty() {
            return Err(StageError::EmptyClip);
        }
        let profile = RetargetProfile::between(&clip.skeleton, &neutral_skeleton(), &self.aliases)?;
        let source = self
            .sources
            .iter_mut()
            .find(|s| s.id == id && matches!(s.feed, Feed::Replay { .. }))
            .ok_or_else(|| StageError::UnknownReplay(id.to_owned()))?;
        source.feed = Feed::Replay {
            clip: Some((clip, profile)),
        };
        Ok(())
    }

    /// Commands to run at their tick. Entries must be ordered by tick.
    pub fn set_script(&mut self, entries: Vec<ScriptEntry>) {
        self.script = entries.into();
    }

    /// Device stream ids and the mailboxes that feed them.
    pub fn mailboxes(&self) -> Vec<(String, Arc<FrameMailbox>)> {
        self.sources
            .iter()
            .filter_map(|s| match &s.feed {
                Feed::Device { stream, mailbox, .. } => Some((stream.clone(), mailbox.clone())),
                Feed::Replay { .. } => None,
            })
            .collect()
    }

    pub fn mailbox_stats(&self) -> Vec<(String, MailboxStats, u64)> {
        self.sources
            .iter()
            .filter_map(|s| match &s.feed {
                Feed::Device { stream, mailbox, .. } => Some((stream.clone(), mailbox.stats(), s.rejected)),
                Feed::Replay { .. } => None,
            })
            .collect()
    }

    /// Ticks needed to play every attached clip to its last frame and reach
    /// every scripted command.
    pub fn natural_ticks(&self) -> u64 {
        let clips = self.sources.iter().filter_map(|s| match &s.feed {
            Feed::Replay { clip: Some((clip, _)) } => Some((clip.duration() / self.dt + 1e-9).floor() as u64 + 1),
            _ => None,
        });
        let script = self.script.back().map(|e| e.tick + 1);
        clips.chain(script).max().unwrap_or(0)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn control(&self) -> &ControlState {
        &self.control
    }

    pub fn correction(&self) -> SpaceCorrection {
        self.correction
    }

    pub fn calibration(&self) -> SpaceCalibration {
        self.calibration
    }

    pub fn composition(&self) -> &CompositionState {
        &self.composition
    }

    pub fn puppeteer(&self) -> &PuppeteerConfig {
        &self.config
    }

    pub fn avatar_profile(&self) -> &RetargetProfile {
        &self.to_avatar
    }

    fn ingest(&mut self, time: f64) {
        for s in &mut self.sources {
            let pose = match &mut s.feed {
                Feed::Device {
                    mailbox,
                    alpha,
                    smoother,
                    to_neutral,
                    ..
                } => {
                    let Some(mut frame) = mailbox.take() else { continue };
                    if let Some(a) = *alpha {
                        let state = match smoother.take() {
                            Some(st) if st.channels() == frame.joint_count() => st,
                            _ => SmootherState::seeded(&frame, a).expect("smoothing factor checked by the scene"),
                        };
                        let (state, filtered) = smooth(state, &frame).expect("channel count matches");
                        *smoother = Some(state);
                        frame = filtered;
                    }
                    match retarget(&device_pose(&frame), to_neutral) {
                        Ok(p) => p,
                        Err(e) => {
                            s.rejected += 1;
                            log::warn!("input {}: dropping frame {}: {e}", s.id, frame.sequence);
                            continue;
                        }
                    }
                }
                Feed::Replay { clip: None } => continue,
                Feed::Replay {
                    clip: Some((clip, profile)),
                } => {
                    let sample = sample_clip(clip, time).expect("clip is non-empty and time non-negative");
                    retarget(&sample, profile).expect("clip poses match the clip skeleton")
                }
            };
            self.registry.set_latest(s.handle, InputData::Pose(pose));
            s.last_update = Some(self.tick);
        }
    }

    fn health(&self) -> Vec<(String, Health)> {
        self.sources
            .iter()
            .map(|s| {
                let h = match s.last_update {
                    None => Health::Missing,
                    Some(t) if (self.tick - t) as f64 * self.dt <= self.scene.stale_after => Health::Fresh,
                    Some(_) => Health::Stale,
                };
                (s.id.clone(), h)
            })
            .collect()
    }

    /// Where the avatar stands in D before this tick's commands.
    fn current_disposition(&self, raw: &Pose) -> Disposition {
        match self.control.locomotion() {
            Some(loco) => loco.disposition(),
            None => Disposition::of_pose(&map_pose_b_to_d(&self.correction.apply(raw), &self.calibration)),
        }
    }

    fn avatar_pivot(&self, raw: &Pose) -> Vec2 {
        self.correction.apply_point(&root_planar(raw))
    }

    fn nudge(&mut self, raw: &Pose, delta: &RefMove) {
        if delta.yaw_deg != 0.0 {
            let pivot = self.avatar_pivot(raw);
            self.correction = self.correction.then_rotate(delta.yaw_deg, &pivot);
        }
        let t = Vec2::new(delta.translation.x, delta.translation.z);
        if t != Vec2::zeros() {
            self.correction = self.correction.then_translate(&t);
        }
    }

    fn land(&mut self, raw: &Pose, target: &Disposition) {
        self.correction = SpaceCorrection::landing(
            &root_planar(raw),
            facing_yaw(&raw.local_rotations[0]),
            target,
            &self.calibration,
        );
    }

    fn resolve_landing(&self, name: &str) -> Result<Disposition, String> {
        self.scene
            .presets
            .resolve(name, &self.scene.zones)
            .ok_or_else(|| format!("unknown preset {name:?}"))
    }

    fn release(&mut self, raw: &Pose, landing: Option<Disposition>) -> Result<(), String> {
        let here = self.current_disposition(raw);
        let t = control_transition(
            &self.control,
            &ControlCommand::Release { landing },
            &self.scene.navmesh,
            &here,
        )
        .map_err(|e| e.to_string())?;
        self.control = t.state;
        if let Some(target) = t.landing {
            self.land(raw, &target);
        }
        Ok(())
    }

    fn face_actor(&mut self, raw: &Pose) -> Result<(), String> {
        let actor = self.actor.ok_or("no actor position known")?;
        let avatar = self.current_disposition(raw);
        let target = solve_disposition(&avatar.position, &map_point_a_to_d(&actor, &self.calibration))
            .map_err(|e| e.to_string())?;
        let turn = disposition_correction(avatar.yaw, target);
        let pivot = self.avatar_pivot(raw);
        self.correction = self.correction.then_rotate(turn, &pivot);
        Ok(())
    }

    fn execute(&mut self, command: &Command, raw: &Pose) -> Result<(), String> {
        match command {
            Command::TakeOver { goal, speed } => self.take_over(*goal, *speed, raw),
            Command::TakeOverZone { zone, speed } => {
                let goal = self
                    .scene
                    .zones
                    .get(zone)
                    .map(|z| z.rect_d.center())
                    .ok_or_else(|| format!("unknown zone {zone:?}"))?;
                self.take_over(goal, *speed, raw)
            }
            Command::Release { preset } => {
                let landing = preset.as_deref().map(|p| self.resolve_landing(p)).transpose()?;
                self.release(raw, landing)
            }
            Command::ApplyPreset { name } => {
                let target = self.resolve_landing(name)?;
                if self.control.owner() == Owner::PathfinderLocomotion {
                    self.release(raw, Some(target))
                } else {
                    self.land(raw, &target);
                    Ok(())
                }
            }
            Command::RotateSpace { degrees } => {
                let pivot = self.avatar_pivot(raw);
                self.correction = self.correction.then_rotate(*degrees, &pivot);
                Ok(())
            }
            Command::RefMove { translation, yaw } => {
                let delta = RefMove::new(stage_core::Vec3::new(translation.x, 0.0, translation.y), *yaw);
                self.nudge(raw, &delta);
                Ok(())
            }
            Command::SetCalibration(s) => {
                s.validate().map_err(|e| e.to_string())?;
                self.calibration.b_to_d = *s;
                Ok(())
            }
            Command::ActorPosition { position, face } => {
                self.actor = Some(*position);
                if *face {
                    self.face_actor(raw)?;
                }
                Ok(())
            }
            Command::FaceActor => self.face_actor(raw),
            Command::Gamepad(axes) => {
                self.gamepad = *axes;
                Ok(())
            }
            Command::SetMode(mode) => {
                self.composition.set_mode(*mode);
                Ok(())
            }
            Command::MoveCamera(delta) => self.composition.move_camera(delta).map_err(|e| e.to_string()),
            Command::SetLight(change) => self.composition.set_light(change).map_err(|e| e.to_string()),
            Command::Puppeteer(doc) => {
                self.config = PuppeteerConfig::from_document(doc, &self.registry).map_err(|e| e.to_string())?;
                Ok(())
            }
        }
    }

    fn take_over(&mut self, goal: Vec2, speed: Option<f64>, raw: &Pose) -> Result<(), String> {
        let here = self.current_disposition(raw);
        let command = ControlCommand::TakeOver {
            goal,
            speed: speed.unwrap_or(self.scene.locomotion_speed),
        };
        let t = control_transition(&self.control, &command, &self.scene.navmesh, &here).map_err(|e| e.to_string())?;
        self.control = t.state;
        Ok(())
    }

    /// Runs one tick with the live commands gathered since the last one.
    pub fn run_tick(&mut self, live: Vec<Incoming>) -> FramePacket {
        let tick = self.tick;
        let time = tick as f64 * self.dt;

        self.ingest(time);
        let snapshot = self.registry.snapshot();
        let blended = self.blender.blend(&self.config, &snapshot);
        let raw = retarget(&blended.pose, &self.to_avatar).expect("blended poses are on the neutral rig");

        let nudge = self.scene.gamepad.ref_move(&self.gamepad, self.dt);
        if !nudge.is_zero() {
            self.nudge(&raw, &nudge);
        }

        let mut pending: Vec<Incoming> = self.deferred.drain(..).collect();
        while self.script.front().is_some_and(|e| e.tick <= tick) {
            let entry = self.script.pop_front().expect("front exists");
            pending.push(Incoming::trusted(entry.command));
        }
        pending.extend(live);

        let mut outcomes = Vec::new();
        let mut transitioned = false;
        for incoming in pending {
            let result = match &incoming.command {
                Err(e) => Err(e.clone()),
                Ok(cmd) => {
                    if let Some(role) = incoming.role.filter(|r| !self.scene.gates.allows(cmd.gate(), *r)) {
                        Err(format!("role {role} may not issue {cmd}"))
                    } else if cmd.is_transition() && transitioned {
                        self.deferred.push_back(incoming);
                        continue;
                    } else {
                        transitioned |= cmd.is_transition();
                        self.execute(cmd, &raw)
                    }
                }
            };
            let command = match &incoming.command {
                Ok(c) => c.to_string(),
                Err(_) => "invalid".into(),
            };
            if let Err(e) = &result {
                log::debug!("tick {tick}: {command}: {e}");
            }
            outcomes.push(CommandOutcome {
                origin: incoming.origin,
                command,
                result,
            });
        }

        if let Some(loco) = self.control.locomotion() {
            let speed = loco.speed;
            let (state, _, _) = step_locomotion(&self.control, speed, self.dt).expect("pathfinder owns the avatar");
            self.control = state;
        }

        let in_d = map_pose_b_to_d(&self.correction.apply(&raw), &self.calibration);
        let pose = match self.control.locomotion() {
            Some(loco) => compose_final_pose(&self.control, &in_d, &loco.disposition()),
            None => in_d,
        };
        let progress = self.control.locomotion().map(|l| Progress {
            walked: l.progress,
            length: l.length(),
            complete: l.complete,
            waypoints: l.path.polyline().copied().collect(),
        });

        let packet = FramePacket {
            tick,
            time,
            disposition: Disposition::of_pose(&pose),
            pose,
            owner: self.control.owner(),
            composition: self.composition.clone(),
            health: self.health(),
            degraded: blended.degraded,
            outcomes,
            progress,
        };
        self.tick += 1;
        packet
    }
}
