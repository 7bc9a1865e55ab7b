//! BVH (HIERARCHY/MOTION) reader for clip replay.
//!
//! End sites are not turned into joints; they only count toward the bind
//! extent used as the skeleton height. Position channels are honored on the
//! root and read but ignored elsewhere. Rotation channels must follow one of
//! the `ZXY`, `XYZ` or `ZYX` orders.

use nalgebra::UnitQuaternion;
use thiserror::Error;

use super::MotionClip;
use crate::math::{compose, Quat, Vec3};
use crate::skeleton::{validate_skeleton, Joint, Pose, Skeleton, Violation};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {kind}")]
pub struct BvhError {
    pub line: usize,
    pub kind: BvhErrorKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum BvhErrorKind {
    #[error("expected {expected}, found end of input")]
    UnexpectedEof { expected: &'static str },
    #[error("expected {expected}, found {found:?}")]
    Expected { expected: &'static str, found: String },
    #[error("invalid number {0:?}")]
    InvalidNumber(String),
    #[error("unsupported channel {0:?}")]
    UnsupportedChannel(String),
    #[error("unsupported rotation order {0}")]
    UnsupportedRotationOrder(String),
    #[error("channel {0:?} listed twice")]
    DuplicateChannel(String),
    #[error("position channels must cover X, Y and Z")]
    PartialPosition,
    #[error("missing MOTION section")]
    MissingMotion,
    #[error("declared {declared} frames but found data for {found} values, {channels} channels per frame")]
    FrameCountMismatch {
        declared: usize,
        found: usize,
        channels: usize,
    },
    #[error("frame time must be positive")]
    NonPositiveFrameTime,
    #[error("skeleton has zero vertical extent")]
    ZeroHeight,
    #[error("invalid skeleton: {0:?}")]
    InvalidSkeleton(Vec<Violation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    fn unit(self) -> nalgebra::Unit<Vec3> {
        match self {
            Axis::X => Vec3::x_axis(),
            Axis::Y => Vec3::y_axis(),
            Axis::Z => Vec3::z_axis(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Position(Axis),
    Rotation(Axis),
}

impl Channel {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "Xposition" => Channel::Position(Axis::X),
            "Yposition" => Channel::Position(Axis::Y),
            "Zposition" => Channel::Position(Axis::Z),
            "Xrotation" => Channel::Rotation(Axis::X),
            "Yrotation" => Channel::Rotation(Axis::Y),
            "Zrotation" => Channel::Rotation(Axis::Z),
            _ => return None,
        })
    }
}

const SUPPORTED_ORDERS: [[Axis; 3]; 3] = [
    [Axis::Z, Axis::X, Axis::Y],
    [Axis::X, Axis::Y, Axis::Z],
    [Axis::Z, Axis::Y, Axis::X],
];

struct Token<'a> {
    text: &'a str,
    line: usize,
}

struct Tokens<'a> {
    items: Vec<Token<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        let mut last_line = 1;
        for (n, line) in text.lines().enumerate() {
            last_line = n + 1;
            for word in line.split_whitespace() {
                // braces glued to names, e.g. "Hips{"
                let mut rest = word;
                while !rest.is_empty() {
                    let cut = rest.find(['{', '}']).unwrap_or(rest.len());
                    if cut == 0 {
                        items.push(Token {
                            text: &rest[..1],
                            line: n + 1,
                        });
                        rest = &rest[1..];
                    } else {
                        items.push(Token {
                            text: &rest[..cut],
                            line: n + 1,
                        });
                        rest = &rest[cut..];
                    }
                }
            }
        }
        Self {
            items,
            pos: 0,
            last_line,
        }
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.items.get(self.pos)
    }

    fn next(&mut self, expected: &'static str) -> Result<&Token<'a>, BvhError> {
        let line = self.last_line;
        let tok = self.items.get(self.pos).ok_or(BvhError {
            line,
            kind: BvhErrorKind::UnexpectedEof { expected },
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect(&mut self, keyword: &'static str) -> Result<usize, BvhError> {
        let tok = self.next(keyword)?;
        if tok.text == keyword {
            Ok(tok.line)
        } else {
            Err(BvhError {
                line: tok.line,
                kind: BvhErrorKind::Expected {
                    expected: keyword,
                    found: tok.text.to_string(),
                },
            })
        }
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        let tok = self.next("number")?;
        parse_number(tok)
    }

    fn count(&mut self) -> Result<usize, BvhError> {
        let tok = self.next("count")?;
        tok.text.parse::<usize>().map_err(|_| BvhError {
            line: tok.line,
            kind: BvhErrorKind::InvalidNumber(tok.text.to_string()),
        })
    }
}

fn parse_number(tok: &Token<'_>) -> Result<f64, BvhError> {
    match tok.text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(BvhError {
            line: tok.line,
            kind: BvhErrorKind::InvalidNumber(tok.text.to_string()),
        }),
    }
}

struct ChannelLayout {
    channels: Vec<Channel>,
    rotation_order: Option<[Axis; 3]>,
}

struct ParsedJoint {
    joint: Joint,
    layout: ChannelLayout,
}

fn read_channels(tokens: &mut Tokens<'_>) -> Result<ChannelLayout, BvhError> {
    let line = tokens.expect("CHANNELS")?;
    let n = tokens.count()?;
    let mut channels = Vec::with_capacity(n);
    for _ in 0..n {
        let tok = tokens.next("channel name")?;
        let ch = Channel::parse(tok.text).ok_or_else(|| BvhError {
            line: tok.line,
            kind: BvhErrorKind::UnsupportedChannel(tok.text.to_string()),
        })?;
        if channels.contains(&ch) {
            return Err(BvhError {
                line: tok.line,
                kind: BvhErrorKind::DuplicateChannel(tok.text.to_string()),
            });
        }
        channels.push(ch);
    }
    let rotations: Vec<Axis> = channels
        .iter()
        .filter_map(|c| match c {
            Channel::Rotation(a) => Some(*a),
            _ => None,
        })
        .collect();
    let positions = channels.len() - rotations.len();
    if positions != 0 && positions != 3 {
        return Err(BvhError {
            line,
            kind: BvhErrorKind::PartialPosition,
        });
    }
    let rotation_order = match rotations.len() {
        0 => None,
        3 => {
            let order = [rotations[0], rotations[1], rotations[2]];
            if !SUPPORTED_ORDERS.contains(&order) {
                return Err(BvhError {
                    line,
                    kind: BvhErrorKind::UnsupportedRotationOrder(order.iter().map(|a| a.letter()).collect()),
                });
            }
            Some(order)
        }
        _ => {
            return Err(BvhError {
                line,
                kind: BvhErrorKind::UnsupportedRotationOrder(rotations.iter().map(|a| a.letter()).collect()),
            })
        }
    };
    Ok(ChannelLayout {
        channels,
        rotation_order,
    })
}

fn read_offset(tokens: &mut Tokens<'_>) -> Result<Vec3, BvhError> {
    tokens.expect("OFFSET")?;
    Ok(Vec3::new(tokens.number()?, tokens.number()?, tokens.number()?))
}

/// Joint list in declaration order plus the bind extent including end sites.
fn read_hierarchy(tokens: &mut Tokens<'_>) -> Result<(Vec<ParsedJoint>, f64, usize), BvhError> {
    let hierarchy_line = tokens.expect("HIERARCHY")?;
    tokens.expect("ROOT")?;

    let mut joints: Vec<ParsedJoint> = Vec::new();
    // bind-pose world positions, used for the vertical extent
    let mut positions: Vec<Vec3> = Vec::new();
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    // open scopes: Some(joint index) or None for an end site
    let mut stack: Vec<Option<usize>> = Vec::new();
    let mut pending_name = Some(tokens.next("joint name")?.text.to_string());

    loop {
        if let Some(name) = pending_name.take() {
            tokens.expect("{")?;
            let parent = stack.iter().rev().flatten().next().copied();
            let offset = read_offset(tokens)?;
            let layout = read_channels(tokens)?;
            let world = parent.map_or(offset, |p| positions[p] + offset);
            lo = lo.min(world.y);
            hi = hi.max(world.y);
            positions.push(world);
            joints.push(ParsedJoint {
                joint: Joint::new(name, parent, offset),
                layout,
            });
            stack.push(Some(joints.len() - 1));
            continue;
        }
        let tok = tokens.next("JOINT, End Site or }")?;
        match tok.text {
            "JOINT" => {
                pending_name = Some(tokens.next("joint name")?.text.to_string());
            }
            "End" => {
                tokens.expect("Site")?;
                tokens.expect("{")?;
                let offset = read_offset(tokens)?;
                let parent = stack.iter().rev().flatten().next().copied();
                let world = parent.map_or(offset, |p| positions[p] + offset);
                lo = lo.min(world.y);
                hi = hi.max(world.y);
                tokens.expect("}")?;
            }
            "}" => {
                stack.pop();
                if stack.is_empty() {
                    break;
                }
            }
            other => {
                return Err(BvhError {
                    line: tok.line,
                    kind: BvhErrorKind::Expected {
                        expected: "JOINT, End Site or }",
                        found: other.to_string(),
                    },
                })
            }
        }
    }
    Ok((joints, hi - lo, hierarchy_line))
}

fn euler_to_quat(order: [Axis; 3], degrees: [f64; 3]) -> Quat {
    order.iter().zip(degrees).fold(Quat::identity(), |acc, (axis, deg)| {
        compose(&acc, &UnitQuaternion::from_axis_angle(&axis.unit(), deg.to_radians()))
    })
}

/// Parses a BVH document into a clip on its own skeleton.
pub fn parse_bvh(text: &str) -> Result<MotionClip, BvhError> {
    let mut tokens = Tokens::new(text);
    let (parsed, extent, hierarchy_line) = read_hierarchy(&mut tokens)?;

    if !(extent > 0.0) {
        return Err(BvhError {
            line: hierarchy_line,
            kind: BvhErrorKind::ZeroHeight,
        });
    }
    let skeleton = Skeleton {
        joints: parsed.iter().map(|p| p.joint.clone()).collect(),
        height: extent,
    };
    if let Err(v) = validate_skeleton(&skeleton) {
        return Err(BvhError {
            line: hierarchy_line,
            kind: BvhErrorKind::InvalidSkeleton(v),
        });
    }

    match tokens.peek() {
        Some(t) if t.text == "MOTION" => {
            tokens.pos += 1;
        }
        Some(t) => {
            return Err(BvhError {
                line: t.line,
                kind: BvhErrorKind::Expected {
                    expected: "MOTION",
                    found: t.text.to_string(),
                },
            })
        }
        None => {
            return Err(BvhError {
                line: tokens.last_line,
                kind: BvhErrorKind::MissingMotion,
            })
        }
    }
    tokens.expect("Frames:")?;
    let declared = tokens.count()?;
    tokens.expect("Frame")?;
    let time_line = tokens.expect("Time:")?;
    let frame_time = tokens.number()?;
    if !(frame_time > 0.0) {
        return Err(BvhError {
            line: time_line,
            kind: BvhErrorKind::NonPositiveFrameTime,
        });
    }

    let channels: usize = parsed.iter().map(|p| p.layout.channels.len()).sum();
    let remaining = tokens.items.len() - tokens.pos;
    if remaining != declared * channels || (channels == 0 && declared > 0 && remaining > 0) {
        let line = tokens.peek().map_or(tokens.last_line, |t| t.line);
        return Err(BvhError {
            line,
            kind: BvhErrorKind::FrameCountMismatch {
                declared,
                found: remaining,
                channels,
            },
        });
    }

    let root_offset = skeleton.joints[0].bind_offset;
    let mut frames = Vec::with_capacity(declared);
    for f in 0..declared {
        let mut rotations = Vec::with_capacity(parsed.len());
        let mut root_translation = root_offset;
        for (j, p) in parsed.iter().enumerate() {
            let mut pos = [0.0; 3];
            let mut rot = [0.0; 3];
            let mut rot_i = 0;
            for ch in &p.layout.channels {
                let v = tokens.number()?;
                match ch {
                    Channel::Position(a) => pos[*a as usize] = v,
                    Channel::Rotation(_) => {
                        rot[rot_i] = v;
                        rot_i += 1;
                    }
                }
            }
            if j == 0 && p.layout.channels.iter().any(|c| matches!(c, Channel::Position(_))) {
                root_translation = root_offset + Vec3::new(pos[0], pos[1], pos[2]);
            }
            rotations.push(match p.layout.rotation_order {
                Some(order) => euler_to_quat(order, rot),
                None => Quat::identity(),
            });
        }
        frames.push(Pose {
            local_rotations: rotations,
            root_translation,
            timestamp: f as f64 * frame_time,
        });
    }

    Ok(MotionClip {
        skeleton,
        frames,
        frame_time,
    })
}

/// Writes a clip back out as BVH using `ZXY` rotations and root positions.
///
/// The root OFFSET is written as zero and folded into the position channels.
pub fn write_bvh(clip: &MotionClip) -> String {
    use std::fmt::Write;
    let s = &clip.skeleton;
    let mut out = String::from("HIERARCHY\n");
    let children = |p: usize| {
        s.joints
            .iter()
            .enumerate()
            .filter(move |(_, j)| j.parent == Some(p))
            .map(|(i, _)| i)
    };

    fn emit(out: &mut String, s: &Skeleton, i: usize, depth: usize, children: &dyn Fn(usize) -> Vec<usize>) {
        let pad = "  ".repeat(depth);
        let j = &s.joints[i];
        let o = if j.parent.is_none() {
            Vec3::zeros()
        } else {
            j.bind_offset
        };
        let kw = if j.parent.is_none() { "ROOT" } else { "JOINT" };
        let _ = writeln!(out, "{pad}{kw} {}\n{pad}{{", j.name);
        let _ = writeln!(out, "{pad}  OFFSET {} {} {}", o.x, o.y, o.z);
        if j.parent.is_none() {
            let _ = writeln!(
                out,
                "{pad}  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation"
            );
        } else {
            let _ = writeln!(out, "{pad}  CHANNELS 3 Zrotation Xrotation Yrotation");
        }
        let kids = children(i);
        if kids.is_empty() {
            let _ = writeln!(out, "{pad}  End Site\n{pad}  {{\n{pad}    OFFSET 0 0 0\n{pad}  }}");
        }
        for k in kids {
            emit(out, s, k, depth + 1, children);
        }
        let _ = writeln!(out, "{pad}}}");
    }
    let collect = |p: usize| children(p).collect::<Vec<_>>();
    emit(&mut out, s, 0, 0, &collect);

    let _ = writeln!(
        out,
        "MOTION\nFrames: {}\nFrame Time: {}",
        clip.frames.len(),
        clip.frame_time
    );
    for frame in &clip.frames {
        let mut values: Vec<f64> = vec![
            frame.root_translation.x,
            frame.root_translation.y,
            frame.root_translation.z,
        ];
        for q in &frame.local_rotations {
            values.extend(quat_to_zxy_degrees(q));
        }
        let line: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// Inverse of the `ZXY` channel composition: `q = Rz · Rx · Ry`.
pub fn quat_to_zxy_degrees(q: &Quat) -> [f64; 3] {
    let m = q.to_rotation_matrix();
    let m = m.matrix();
    // Rz·Rx·Ry: m[2][1] = sin(x)
    let x = m[(2, 1)].clamp(-1.0, 1.0).asin();
    let (z, y) = if x.cos().abs() > 1e-9 {
        ((-m[(0, 1)]).atan2(m[(1, 1)]), (-m[(2, 0)]).atan2(m[(2, 2)]))
    } else {
        (m[(1, 0)].atan2(m[(0, 0)]), 0.0)
    };
    [z.to_degrees(), x.to_degrees(), y.to_degrees()]
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_JOINT: &str = "\
HIERARCHY
ROOT Hips
{
  OFFSET 0.0 0.0 0.0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Chest
  {
    OFFSET 0.0 0.5 0.0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0.0 0.3 0.0
    }
  }
}
MOTION
Frames: 2
Frame Time: 0.033333
0.0 1.0 0.0 0.0 0.0 0.0 0.0 0.0 0.0
0.5 1.0 0.0 90.0 0.0 0.0 0.0 0.0 45.0
";

    #[test]
    fn two_joint_fixture() {
        let clip = parse_bvh(TWO_JOINT).unwrap();
        assert_eq!(clip.skeleton.len(), 2);
        assert_eq!(clip.frame_time, 0.033333);
        assert_eq!(clip.frames.len(), 2);
        assert!((clip.skeleton.height - 0.8).abs() < 1e-12);
        assert_eq!(clip.frames[1].root_translation, Vec3::new(0.5, 1.0, 0.0));
        let z90 = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 90f64.to_radians());
        assert!(clip.frames[1].local_rotations[0].angle_to(&z90) < 1e-12);
        let y45 = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), 45f64.to_radians());
        assert!(clip.frames[1].local_rotations[1].angle_to(&y45) < 1e-12);
    }

    #[test]
    fn channel_order_is_honored() {
        // Z then X: q = Rz(90) · Rx(90)
        let text = TWO_JOINT.replace(
            "0.5 1.0 0.0 90.0 0.0 0.0 0.0 0.0 45.0",
            "0.5 1.0 0.0 90.0 90.0 0.0 0.0 0.0 0.0",
        );
        let clip = parse_bvh(&text).unwrap();
        let expected = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 90f64.to_radians())
            * UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 90f64.to_radians());
        assert!(clip.frames[1].local_rotations[0].angle_to(&expected) < 1e-12);
        // the reverse composition is a different rotation
        let reversed = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 90f64.to_radians())
            * UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 90f64.to_radians());
        assert!(clip.frames[1].local_rotations[0].angle_to(&reversed) > 0.1);
    }

    #[test]
    fn missing_motion() {
        let cut = TWO_JOINT.split("MOTION").next().unwrap();
        let err = parse_bvh(cut).unwrap_err();
        assert_eq!(err.kind, BvhErrorKind::MissingMotion);
    }

    #[test]
    fn empty_input() {
        let err = parse_bvh("").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(matches!(err.kind, BvhErrorKind::UnexpectedEof { .. }));
    }

    #[test]
    fn frame_count_mismatch() {
        let text = TWO_JOINT.replace("Frames: 2", "Frames: 3");
        let err = parse_bvh(&text).unwrap_err();
        assert!(matches!(err.kind, BvhErrorKind::FrameCountMismatch { declared: 3, .. }));
    }

    #[test]
    fn unsupported_channel_and_order() {
        let text = TWO_JOINT.replace(
            "CHANNELS 3 Zrotation Xrotation Yrotation",
            "CHANNELS 3 Zrotation Xrotation Wobble",
        );
        let err = parse_bvh(&text).unwrap_err();
        assert_eq!(err.kind, BvhErrorKind::UnsupportedChannel("Wobble".into()));
        assert_eq!(err.line, 9);

        let text = TWO_JOINT.replace(
            "CHANNELS 3 Zrotation Xrotation Yrotation",
            "CHANNELS 3 Yrotation Xrotation Zrotation",
        );
        let err = parse_bvh(&text).unwrap_err();
        assert_eq!(err.kind, BvhErrorKind::UnsupportedRotationOrder("YXZ".into()));
    }

    #[test]
    fn bad_number_reports_line() {
        let text = TWO_JOINT.replace("0.5 1.0 0.0 90.0", "0.5 abc 0.0 90.0");
        let err = parse_bvh(&text).unwrap_err();
        assert_eq!(err.line, 20);
        assert_eq!(err.kind, BvhErrorKind::InvalidNumber("abc".into()));
    }

    #[test]
    fn duplicate_joint_names_rejected() {
        let text = TWO_JOINT.replace("JOINT Chest", "JOINT Hips");
        let err = parse_bvh(&text).unwrap_err();
        assert!(matches!(err.kind, BvhErrorKind::InvalidSkeleton(_)));
    }

    #[test]
    fn zxy_extraction_round_trips() {
        let q = euler_to_quat([Axis::Z, Axis::X, Axis::Y], [30.0, -20.0, 75.0]);
        let [z, x, y] = quat_to_zxy_degrees(&q);
        assert!((z - 30.0).abs() < 1e-9 && (x + 20.0).abs() < 1e-9 && (y - 75.0).abs() < 1e-9);
    }

    #[test]
    fn written_clip_parses_back() {
        let clip = parse_bvh(TWO_JOINT).unwrap();
        let again = parse_bvh(&write_bvh(&clip)).unwrap();
        assert_eq!(again.skeleton.len(), clip.skeleton.len());
        for (a, b) in clip.frames.iter().zip(&again.frames) {
            assert!((a.root_translation - b.root_translation).norm() < 1e-9);
            for (qa, qb) in a.local_rotations.iter().zip(&b.local_rotations) {
                assert!(qa.angle_to(qb) < 1e-9);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn parser_never_panics(text in "\\PC{0,400}") {
            let _ = parse_bvh(&text);
        }

        #[test]
        fn truncations_error_or_validate(cut in 0usize..TWO_JOINT.len()) {
            if let Ok(clip) = parse_bvh(&TWO_JOINT[..cut]) {
                proptest::prop_assert!(validate_skeleton(&clip.skeleton).is_ok());
            }
        }
    }
}
