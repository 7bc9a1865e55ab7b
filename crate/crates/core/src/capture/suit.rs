use crate::math::Vec3;
use crate::skeleton::{neutral_skeleton, Joint, Skeleton};

/// Joint count of the inertial suit.
pub const SUIT_JOINTS: usize = 32;

/// Layout of the 32-sensor suit: the neutral body in the same order,
/// followed by four fingers per hand and the jaw.
pub fn suit_skeleton() -> Skeleton {
    let mut joints = neutral_skeleton().joints;
    let index = |joints: &[Joint], name: &str| joints.iter().position(|j| j.name == name).unwrap();
    let extras: [(&str, &str, [f64; 3]); 9] = [
        ("LeftHandThumb", "LeftHand", [0.03, 0.0, -0.04]),
        ("LeftHandIndex", "LeftHand", [0.02, 0.0, -0.09]),
        ("LeftHandMiddle", "LeftHand", [0.0, 0.0, -0.10]),
        ("LeftHandPinky", "LeftHand", [-0.03, 0.0, -0.08]),
        ("RightHandThumb", "RightHand", [0.03, 0.0, 0.04]),
        ("RightHandIndex", "RightHand", [0.02, 0.0, 0.09]),
        ("RightHandMiddle", "RightHand", [0.0, 0.0, 0.10]),
        ("RightHandPinky", "RightHand", [-0.03, 0.0, 0.08]),
        ("Jaw", "Head", [0.05, 0.02, 0.0]),
    ];
    for (name, parent, o) in extras {
        let p = index(&joints, parent);
        joints.push(Joint::new(name, Some(p), Vec3::new(o[0], o[1], o[2])));
    }
    let height = neutral_skeleton().height;
    Skeleton::new(joints, height).expect("suit rig is well formed")
}
