//! Broker-less event bus for the stage: boxed values with a canonical
//! little-endian codec, capped envelopes, topic patterns and a TCP peer mesh
//! with synchronous local dispatch.

pub mod envelope;
pub mod session;
pub mod station;
pub mod topic;
pub mod value;

pub use envelope::{decode_envelope, encode_envelope, Envelope, EnvelopeError, MAX_ENVELOPE_BYTES};
pub use session::{BusError, JoinReport, PeerInfo, PeerWarning, Session, SessionConfig, SessionStats, Subscription};
pub use station::{Role, StationDescriptor, StationError, StationRegistry};
pub use topic::{PatternError, TopicPattern};
pub use value::{decode_value, encode_value, CodecError, Value, MAX_DEPTH};

/// Topics the stage uses.
pub mod topics {
    pub const MOCAP_FRAME_META: &str = "mocap/frame-meta";
    pub const PATHFIND_TAKEOVER: &str = "pathfind/takeover";
    pub const PATHFIND_RELEASE: &str = "pathfind/release";
    pub const PATHFIND_PROGRESS: &str = "pathfind/progress";
    pub const SPACE_CALIBRATION: &str = "space/calibration";
    pub const SPACE_ACTOR_POS: &str = "space/actor-pos";
    pub const PRESET_APPLY: &str = "preset/apply";
    pub const COMPOSITION_MODE: &str = "composition/mode";
    pub const COMPOSITION_CAMERA: &str = "composition/camera";
    pub const COMPOSITION_LIGHT: &str = "composition/light";
    pub const PUPPETEER_CONFIG: &str = "puppeteer/config";
    pub const TICK_FRAME: &str = "tick/frame";
}
