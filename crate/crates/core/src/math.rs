//! Shared numeric conventions.
//!
//! Right-handed, Y-up, meters. Floor-plan quantities are 2-vectors holding
//! `(x, z)`. A yaw of `θ` degrees turns `+X` toward `+Z`, so the planar
//! rotation `R(θ)` maps `(1, 0)` to `(cos θ, sin θ)` and the yaw of a planar
//! direction `(x, z)` is `atan2(z, x)`. Rigs face `+X` in their bind pose.

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Forward axis of every rig in bind pose.
pub const FORWARD: Vec3 = Vec3::new(1.0, 0.0, 0.0);

/// Tolerance on `|q| - 1` accepted for stored rotations.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Spherical interpolation along the shorter arc.
///
/// `t == 0` returns `a` and `t == 1` returns `b` bit for bit, and equal inputs
/// come back unchanged, so blends of identical poses are exact.
pub fn quat_slerp(a: &Quat, b: &Quat, t: f64) -> Quat {
    if t <= 0.0 || a == b {
        return *a;
    }
    if t >= 1.0 {
        return *b;
    }
    let qa = a.as_ref().coords;
    let mut qb = b.as_ref().coords;
    let mut dot = qa.dot(&qb);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    let mixed = if dot > 0.9995 {
        qa * (1.0 - t) + qb * t
    } else {
        let theta = dot.min(1.0).acos();
        let sin_theta = theta.sin();
        qa * (((1.0 - t) * theta).sin() / sin_theta) + qb * ((t * theta).sin() / sin_theta)
    };
    Unit::new_normalize(Quaternion::from(mixed))
}

/// Composition followed by renormalization.
pub fn compose(a: &Quat, b: &Quat) -> Quat {
    renormalize(&(a * b))
}

pub fn renormalize(q: &Quat) -> Quat {
    Unit::new_normalize(q.into_inner())
}

pub fn is_unit(q: &Quaternion<f64>) -> bool {
    (q.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
}

/// Rotation turning `+X` toward `+Z` by `degrees`.
pub fn yaw_rotation(degrees: f64) -> Quat {
    UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -degrees.to_radians())
}

/// Wraps an angle into `(-180, 180]`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Yaw of a planar direction, in `(-180, 180]`.
pub fn planar_yaw(direction: &Vec2) -> f64 {
    wrap_degrees(direction.y.atan2(direction.x).to_degrees())
}

/// Facing yaw of a world rotation: the bind forward axis projected on the floor.
pub fn facing_yaw(rotation: &Quat) -> f64 {
    let f = rotation * FORWARD;
    planar_yaw(&Vec2::new(f.x, f.z))
}

/// Planar rotation `R(θ)` in the floor-plan convention.
pub fn rotate_planar(p: &Vec2, degrees: f64) -> Vec2 {
    let (s, c) = degrees.to_radians().sin_cos();
    Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

pub fn lerp3(a: &Vec3, b: &Vec3, t: f64) -> Vec3 {
    a * (1.0 - t) + b * t
}
