//! Camera and lighting state under fixed or manipulated composition.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;
use stage_core::math::wrap_degrees;
use stage_core::Vec3;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum Mode {
    /// Camera and lights stay where they are; only avatars move.
    #[default]
    Fixed,
    /// Camera and lights follow the people on stage.
    Manipulated,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fixed => "Fixed",
            Mode::Manipulated => "Manipulated",
        }
    }
}

impl FromStr for Mode {
    type Err = CompositionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Fixed" => Ok(Mode::Fixed),
            "Manipulated" => Ok(Mode::Manipulated),
            other => Err(CompositionError::UnknownMode(other.to_owned())),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub fov: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            position: Vec3::new(-6.0, 1.6, 0.0),
            yaw: 0.0,
            pitch: 0.0,
            fov: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Light {
    pub id: String,
    pub position: Vec3,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CameraDelta {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub fov: f64,
}

impl CameraDelta {
    pub fn is_zero(&self) -> bool {
        self.position == Vec3::zeros() && self.yaw == 0.0 && self.pitch == 0.0 && self.fov == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LightChange {
    pub id: String,
    pub position: Option<Vec3>,
    pub intensity: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CompositionError {
    #[error("composition is fixed")]
    CompositionLocked,
    #[error("field of view {0} is outside (10, 170)")]
    FovOutOfRange(f64),
    #[error("pitch {0} is outside [-90, 90]")]
    PitchOutOfRange(f64),
    #[error("light intensity {0} is negative")]
    NegativeIntensity(f64),
    #[error("unknown light {0:?}")]
    UnknownLight(String),
    #[error("duplicate light {0:?}")]
    DuplicateLight(String),
    #[error("unknown composition mode {0:?}")]
    UnknownMode(String),
    #[error("non-finite value")]
    NonFinite,
}

fn fov_ok(fov: f64) -> bool {
    fov > 10.0 && fov < 170.0
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompositionState {
    pub mode: Mode,
    pub camera: Camera,
    pub lights: Vec<Light>,
}

impl CompositionState {
    pub fn new(mode: Mode, camera: Camera, lights: Vec<Light>) -> Result<Self, CompositionError> {
        if !fov_ok(camera.fov) {
            return Err(CompositionError::FovOutOfRange(camera.fov));
        }
        if !(-90.0..=90.0).contains(&camera.pitch) {
            return Err(CompositionError::PitchOutOfRange(camera.pitch));
        }
        for (i, l) in lights.iter().enumerate() {
            if !(l.intensity >= 0.0) {
                return Err(CompositionError::NegativeIntensity(l.intensity));
            }
            if lights[..i].iter().any(|o| o.id == l.id) {
                return Err(CompositionError::DuplicateLight(l.id.clone()));
            }
        }
        Ok(Self { mode, camera, lights })
    }

    /// Returns whether the mode changed.
    pub fn set_mode(&mut self, mode: Mode) -> bool {
        std::mem::replace(&mut self.mode, mode) != mode
    }

    pub fn move_camera(&mut self, delta: &CameraDelta) -> Result<(), CompositionError> {
        if self.mode == Mode::Fixed {
            return Err(CompositionError::CompositionLocked);
        }
        let finite = delta.position.iter().all(|v| v.is_finite())
            && delta.yaw.is_finite()
            && delta.pitch.is_finite()
            && delta.fov.is_finite();
        if !finite {
            return Err(CompositionError::NonFinite);
        }
        let fov = self.camera.fov + delta.fov;
        if !fov_ok(fov) {
            return Err(CompositionError::FovOutOfRange(fov));
        }
        let pitch = self.camera.pitch + delta.pitch;
        if !(-90.0..=90.0).contains(&pitch) {
            return Err(CompositionError::PitchOutOfRange(pitch));
        }
        self.camera = Camera {
            position: self.camera.position + delta.position,
            yaw: if delta.yaw == 0.0 {
                self.camera.yaw
            } else {
                wrap_degrees(self.camera.yaw + delta.yaw)
            },
            pitch,
            fov,
        };
        Ok(())
    }

    pub fn set_light(&mut self, change: &LightChange) -> Result<(), CompositionError> {
        if self.mode == Mode::Fixed {
            return Err(CompositionError::CompositionLocked);
        }
        let light = self
            .lights
            .iter_mut()
            .find(|l| l.id == change.id)
            .ok_or_else(|| CompositionError::UnknownLight(change.id.clone()))?;
        if let Some(i) = change.intensity {
            if !(i >= 0.0) || !i.is_finite() {
                return Err(CompositionError::NegativeIntensity(i));
            }
        }
        if let Some(p) = change.position {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(CompositionError::NonFinite);
            }
            light.position = p;
        }
        if let Some(i) = change.intensity {
            light.intensity = i;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(mode: Mode) -> CompositionState {
        CompositionState::new(
            mode,
            Camera::default(),
            vec![Light {
                id: "key".into(),
                position: Vec3::new(0.0, 4.0, 0.0),
                intensity: 1.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn modes() {
        let mut s = state(Mode::Manipulated);
        assert!(s.set_mode(Mode::Fixed));
        assert_eq!(s.mode, Mode::Fixed);
        assert!(!s.set_mode(Mode::Fixed));
        assert_eq!("Manipulated".parse::<Mode>(), Ok(Mode::Manipulated));
        assert!("Loose".parse::<Mode>().is_err());
    }

    #[test]
    fn camera_moves() {
        let mut s = state(Mode::Manipulated);
        s.move_camera(&CameraDelta {
            yaw: 10.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.camera.yaw, 10.0);

        let before = s.clone();
        let narrow = CameraDelta {
            fov: 5.0 - s.camera.fov,
            ..Default::default()
        };
        assert_eq!(s.move_camera(&narrow), Err(CompositionError::FovOutOfRange(5.0)));
        assert_eq!(s, before);

        let mut fixed = state(Mode::Fixed);
        let before = fixed.clone();
        assert_eq!(
            fixed.move_camera(&CameraDelta {
                yaw: 10.0,
                ..Default::default()
            }),
            Err(CompositionError::CompositionLocked)
        );
        assert_eq!(fixed, before);
    }

    #[test]
    fn lights() {
        let mut s = state(Mode::Manipulated);
        let dim = LightChange {
            id: "key".into(),
            position: None,
            intensity: Some(0.25),
        };
        s.set_light(&dim).unwrap();
        assert_eq!(s.lights[0].intensity, 0.25);
        let negative = LightChange {
            intensity: Some(-1.0),
            ..dim.clone()
        };
        assert_eq!(s.set_light(&negative), Err(CompositionError::NegativeIntensity(-1.0)));
        let missing = LightChange {
            id: "fill".into(),
            ..dim
        };
        assert!(matches!(s.set_light(&missing), Err(CompositionError::UnknownLight(_))));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Mode(bool),
        Camera(f64, f64, f64),
        Light(f64),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            any::<bool>().prop_map(Op::Mode),
            (-50.0f64..50.0, -50.0f64..50.0, -100.0f64..100.0).prop_map(|(a, b, c)| Op::Camera(a, b, c)),
            (-1.0f64..3.0).prop_map(Op::Light),
        ]
    }

    proptest! {
        #[test]
        fn fixed_mode_freezes_camera_and_lights(ops in prop::collection::vec(op(), 0..60)) {
            let mut s = state(Mode::Manipulated);
            for o in ops {
                let before = s.clone();
                let _ = match o {
                    Op::Mode(m) => {
                        s.set_mode(if m { Mode::Fixed } else { Mode::Manipulated });
                        Ok(())
                    }
                    Op::Camera(yaw, pitch, fov) => s.move_camera(&CameraDelta { position: Vec3::new(0.1, 0.0, 0.0), yaw, pitch, fov }),
                    Op::Light(i) => s.set_light(&LightChange { id: "key".into(), position: None, intensity: Some(i) }),
                };
                if before.mode == Mode::Fixed {
                    prop_assert_eq!(&s.camera, &before.camera);
                    prop_assert_eq!(&s.lights, &before.lights);
                }
                prop_assert!(fov_ok(s.camera.fov));
                prop_assert!(s.lights.iter().all(|l| l.intensity >= 0.0));
            }
        }
    }
}
