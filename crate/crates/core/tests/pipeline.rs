use std::collections::BTreeMap;

use nalgebra::UnitQuaternion;
use stage_core::capture::{
    decode_device_frame, encode_device_frame, parse_bvh, sample_clip, smooth, suit_skeleton, write_bvh, DeviceFrame,
    FrameMailbox, MotionClip, SmootherState,
};
use stage_core::math::{facing_yaw, wrap_degrees, yaw_rotation};
use stage_core::pathfind::{
    build_navmesh, compose_final_pose, control_transition, step_locomotion, ControlCommand, ControlState, Owner, Rect,
};
use stage_core::puppeteer::{blend, BodyRegion, InputData, InputKind, InputRegistry, PuppeteerConfig, RegionSet};
use stage_core::retarget::{retarget, AliasTable, RetargetProfile};
use stage_core::stagespace::{map_pose_b_to_d, Disposition, Similarity2, SpaceCalibration, SpaceCorrection};
use stage_core::{forward_kinematics, neutral_skeleton, Pose, Quat, Vec2, Vec3};

fn suit_frame(seq: u64, lift: f64) -> DeviceFrame {
    let suit = suit_skeleton();
    let mut rotations = vec![Quat::identity(); suit.len()];
    rotations[suit.index_of("LeftUpperArm").unwrap()] = UnitQuaternion::from_euler_angles(lift, 0.0, 0.0);
    rotations[0] = yaw_rotation(20.0);
    DeviceFrame {
        stream_id: "suitA".into(),
        local_rotations: rotations,
        root_translation: Vec3::new(0.5, 0.95, 0.25),
        sequence: seq,
        timestamp: seq as f64 / 60.0,
    }
}

#[test]
fn device_frames_through_blend_and_placement() {
    let mailbox = FrameMailbox::new();
    for seq in [3, 1, 4] {
        let wire = encode_device_frame(&suit_frame(seq, 0.1 * seq as f64)).unwrap();
        mailbox.offer(decode_device_frame(&wire).unwrap());
    }
    let frame = mailbox.take().unwrap();
    assert_eq!(frame.sequence, 4);
    assert_eq!(mailbox.stats().dropped_late, 1);

    let state = SmootherState::seeded(&frame, 0.5).unwrap();
    let (_, smoothed) = smooth(state, &frame).unwrap();
    let suit_pose = Pose {
        local_rotations: smoothed.local_rotations.clone(),
        root_translation: smoothed.root_translation,
        timestamp: smoothed.timestamp,
    };
    let neutral = neutral_skeleton();
    let to_neutral = RetargetProfile::between(&suit_skeleton(), &neutral, &AliasTable::new()).unwrap();
    let live = retarget(&suit_pose, &to_neutral).unwrap();

    let mut registry = InputRegistry::new();
    let suit_input = registry
        .register_input("suitA", InputKind::MocapStream, RegionSet::all())
        .unwrap();
    let clip_input = registry
        .register_input("take", InputKind::Replay, RegionSet::only(BodyRegion::RightArm))
        .unwrap();
    let mut waving = Pose::rest(&neutral);
    let right = neutral.index_of("RightUpperArm").unwrap();
    waving.local_rotations[right] = UnitQuaternion::from_euler_angles(0.0, 0.0, 1.0);
    registry.set_latest(suit_input, InputData::Pose(live.clone()));
    registry.set_latest(clip_input, InputData::Pose(waving.clone()));
    let mut routes = BTreeMap::new();
    for r in BodyRegion::ALL {
        routes.insert(r, vec![("suitA".to_string(), 1.0)]);
    }
    routes.insert(BodyRegion::RightArm, vec![("take".to_string(), 1.0)]);
    let config = PuppeteerConfig::new(routes, &registry).unwrap();
    let blended = blend(&config, &registry.snapshot(), &Pose::rest(&neutral));
    assert!(blended.degraded.is_empty());
    assert_eq!(blended.pose.local_rotations[right], waving.local_rotations[right]);
    let left = neutral.index_of("LeftUpperArm").unwrap();
    assert_eq!(blended.pose.local_rotations[left], live.local_rotations[left]);

    let avatar = neutral.scaled(0.8);
    let to_avatar = RetargetProfile::between(&neutral, &avatar, &AliasTable::new()).unwrap();
    let b = retarget(&blended.pose, &to_avatar).unwrap();
    assert!((b.root_translation - Vec3::new(0.4, 0.76, 0.2)).norm() < 1e-6);

    let cal = SpaceCalibration {
        b_to_d: Similarity2::new(1.0, 90.0, Vec2::new(2.0, 0.0)).unwrap(),
        a_to_d: Similarity2::identity(),
    };
    let d = map_pose_b_to_d(&b, &cal);
    let placed = Disposition::of_pose(&d);
    assert!((placed.position - Vec2::new(1.8, 0.4)).norm() < 1e-6);
    assert!((placed.yaw - 110.0).abs() < 1e-4);
    assert_eq!(d.local_rotations[1..], b.local_rotations[1..]);
}

#[test]
fn takeover_walk_and_preset_landing() {
    let mesh = build_navmesh(
        &Rect::new(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0)),
        &[Rect::new(Vec2::new(-0.5, -5.0), Vec2::new(0.5, 3.0))],
        0.25,
    )
    .unwrap();
    let cal = SpaceCalibration::default();
    let mut mocap = Pose::rest(&neutral_skeleton());
    mocap.root_translation = Vec3::new(-3.0, 0.95, -3.0);
    mocap.local_rotations[3] = UnitQuaternion::from_euler_angles(0.2, 0.1, 0.0);
    let here = Disposition::of_pose(&mocap);

    let takeover = ControlCommand::TakeOver {
        goal: Vec2::new(3.0, -3.0),
        speed: 2.0,
    };
    let mut state = control_transition(&ControlState::MocaptorFull, &takeover, &mesh, &here)
        .unwrap()
        .state;
    assert_eq!(state.owner(), Owner::PathfinderLocomotion);
    let mut ticks = 0;
    while !state.locomotion().unwrap().complete {
        state = step_locomotion(&state, 2.0, 1.0 / 60.0).unwrap().0;
        let loco = state.locomotion().unwrap();
        let out = compose_final_pose(&state, &mocap, &loco.disposition());
        assert_eq!(out.local_rotations[1..], mocap.local_rotations[1..]);
        assert_eq!(out.root_translation.y, mocap.root_translation.y);
        assert!(mesh.is_walkable(mesh.cell_at(&loco.position).unwrap()));
        ticks += 1;
        assert!(ticks < 10_000);
    }
    let length = state.locomotion().unwrap().length();
    assert!(length > 10.0, "the wall forces a detour, got {length}");

    let preset = Disposition::new(Vec2::new(4.0, 4.0), -45.0);
    let t = control_transition(&state, &ControlCommand::Release { landing: Some(preset) }, &mesh, &here).unwrap();
    assert_eq!(t.state, ControlState::MocaptorFull);
    let landing = SpaceCorrection::landing(
        &Vec2::new(mocap.root_translation.x, mocap.root_translation.z),
        facing_yaw(&mocap.local_rotations[0]),
        &t.landing.unwrap(),
        &cal,
    );
    let landed = Disposition::of_pose(&map_pose_b_to_d(&landing.apply(&mocap), &cal));
    assert!((landed.position - preset.position).norm() < 1e-12);
    assert!(wrap_degrees(landed.yaw - preset.yaw).abs() < 1e-9);
}

#[test]
fn bvh_clip_feeds_the_neutral_rig() {
    let neutral = neutral_skeleton();
    let frames = (0..30)
        .map(|i| {
            let mut p = Pose::rest(&neutral);
            p.timestamp = i as f64 / 30.0;
            p.root_translation = Vec3::new(0.1 * i as f64, 0.95, 0.0);
            p.local_rotations[5] = yaw_rotation(i as f64);
            p
        })
        .collect();
    let clip = MotionClip {
        skeleton: neutral.clone(),
        frames,
        frame_time: 1.0 / 30.0,
    };
    let parsed = parse_bvh(&write_bvh(&clip)).unwrap();
    assert_eq!(parsed.frames.len(), 30);
    let profile = RetargetProfile::between(&parsed.skeleton, &neutral, &AliasTable::common()).unwrap();
    let mid = retarget(&sample_clip(&parsed, 0.5).unwrap(), &profile).unwrap();
    assert!((mid.root_translation.x - 1.5).abs() < 1e-9);
    assert!((facing_yaw(&mid.local_rotations[5]) - 15.0).abs() < 1e-6);
    let world = forward_kinematics(&neutral, &mid).unwrap();
    assert!(world[6].position.y > world[0].position.y);
}
