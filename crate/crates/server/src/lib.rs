//! Stage server: a fixed-rate tick loop turning motion capture, replays and
//! manipulator commands into one avatar pose per tick, with a bus session,
//! a UDP mocap receiver and a WebSocket console gateway around it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod command;
pub mod composition;
pub mod net;
pub mod packet;
pub mod runtime;
pub mod scene;
pub mod stage;

pub use command::{command_from_event, parse_command, parse_script, Command, Gate, RoleGates, ScriptEntry};
pub use composition::{Camera, CompositionError, CompositionState, Light, Mode};
pub use packet::{read_packet_log, FramePacket, Health, PacketLog};
pub use runtime::{run, RunOptions, RunSummary};
pub use scene::{Scene, SceneError};
pub use stage::{Incoming, Stage, StageError, DEFAULT_TICK_RATE};
