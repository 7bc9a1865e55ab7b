//! The tick loop: wires the stage to the packet log, the bus and the network
//! listeners, and paces ticks in live mode.

use std::fs::File;
use std::io::{self, BufWriter};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use stage_bus::{topics, BusError, Envelope, Role, Session, SessionConfig, StationRegistry, Subscription, Value};
use thiserror::Error;

use crate::command::command_from_event;
use crate::net::{spawn_console_gateway, spawn_mocap_listener, Roster, StopFlag, CONSOLE_ACK};
use crate::packet::{FramePacket, LogError, Origin, PacketLog};
use crate::stage::{Incoming, Stage};

/// Topics that carry commands for the stage.
pub const COMMAND_TOPICS: [&str; 9] = [
    topics::PATHFIND_TAKEOVER,
    topics::PATHFIND_RELEASE,
    topics::PRESET_APPLY,
    topics::SPACE_CALIBRATION,
    topics::SPACE_ACTOR_POS,
    topics::COMPOSITION_MODE,
    topics::COMPOSITION_CAMERA,
    topics::COMPOSITION_LIGHT,
    topics::PUPPETEER_CONFIG,
];

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Stop after this many ticks; live runs otherwise go on until stopped.
    pub ticks: Option<u64>,
    pub record: Option<PathBuf>,
    pub listen_mocap: Option<SocketAddr>,
    pub listen_bus: Option<SocketAddr>,
    pub listen_console: Option<SocketAddr>,
    /// Console frame summaries go out every this many ticks.
    pub decimation: u64,
}

impl RunOptions {
    /// Live runs pace ticks on the wall clock; offline runs go flat out.
    pub fn is_live(&self) -> bool {
        self.listen_mocap.is_some() || self.listen_bus.is_some() || self.listen_console.is_some()
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("packet log: {0}")]
    Log(#[from] LogError),
    #[error("{what}: {source}")]
    Io { what: &'static str, source: io::Error },
    #[error("bus: {0}")]
    Bus(#[from] BusError),
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub ticks: u64,
    /// Compute time of every tick.
    pub tick_times: Vec<Duration>,
    pub last: Option<FramePacket>,
}

impl RunSummary {
    /// The `q` quantile of tick compute times, `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> Duration {
        if self.tick_times.is_empty() {
            return Duration::ZERO;
        }
        let mut sorted = self.tick_times.clone();
        sorted.sort();
        let at = ((sorted.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
        sorted[at]
    }
}

struct Network {
    session: Arc<Session>,
    roster: Roster,
    queue: Arc<Mutex<Vec<Envelope>>>,
    _subs: Vec<Subscription>,
    threads: Vec<JoinHandle<()>>,
}

impl Network {
    fn start(stage: &Stage, opts: &RunOptions, stop: &StopFlag) -> Result<Self, RunError> {
        let io_err = |what| move |source| RunError::Io { what, source };
        let mut registry: StationRegistry = stage.scene().stations.clone();
        let own = registry
            .register(
                Role::Server,
                &opts.listen_bus.map(|a| a.to_string()).unwrap_or_default(),
            )
            .expect("a server station never collides");
        let mut config = SessionConfig::new(own, Role::Server);
        if let Some(addr) = opts.listen_bus {
            config = config.listen(addr);
        }
        for s in registry.iter().filter(|s| s.id != own && !s.address.is_empty()) {
            config = config.peer(s.address.clone());
        }
        let (session, report) = Session::join(config)?;
        for w in &report.warnings {
            log::warn!("peer {} unreachable: {}", w.address, w.error);
        }
        if let Some(addr) = session.local_addr() {
            log::info!("bus listening on {addr}");
        }
        let session = Arc::new(session);
        let roster: Roster = Arc::new(Mutex::new(registry));
        let queue = Arc::new(Mutex::new(Vec::new()));
        let mut subs = Vec::new();
        for topic in COMMAND_TOPICS {
            let q = queue.clone();
            subs.push(session.subscribe(topic, move |env: &Envelope| {
                if env.sender != own {
                    q.lock().push(env.clone());
                }
            })?);
        }

        let mut threads = Vec::new();
        if let Some(addr) = opts.listen_mocap {
            let (local, t) =
                spawn_mocap_listener(addr, stage.mailboxes(), stop.clone()).map_err(io_err("mocap listener"))?;
            log::info!("mocap listening on udp {local}");
            threads.push(t);
        }
        if let Some(addr) = opts.listen_console {
            let (local, t) =
                spawn_console_gateway(addr, session.clone(), roster.clone(), opts.decimation, stop.clone())
                    .map_err(io_err("console gateway"))?;
            log::info!("console listening on ws://{local}");
            threads.push(t);
        }
        Ok(Self {
            session,
            roster,
            queue,
            _subs: subs,
            threads,
        })
    }

    fn role_of(&self, sender: u32) -> Option<Role> {
        self.roster.lock().role_of(sender).or_else(|| {
            self.session
                .peers()
                .into_iter()
                .find(|p| p.station.id == sender)
                .map(|p| p.station.role)
        })
    }

    fn drain(&self) -> Vec<Incoming> {
        let envelopes: Vec<Envelope> = std::mem::take(&mut *self.queue.lock());
        envelopes
            .into_iter()
            .map(|env| {
                let origin = Origin::Station {
                    sender: env.sender,
                    seq: env.seq,
                };
                match self.role_of(env.sender) {
                    Some(role) => Incoming {
                        origin,
                        role: Some(role),
                        command: command_from_event(&env.topic, &env.payload).map_err(|e| e.to_string()),
                    },
                    None => Incoming {
                        origin,
                        role: None,
                        command: Err(format!("unknown station {}", env.sender)),
                    },
                }
            })
            .collect()
    }

    fn publish(&self, topic: &str, payload: Value) {
        if let Err(e) = self.session.publish(topic, payload) {
            log::warn!("publishing {topic}: {e}");
        }
    }

    fn emit(&self, stage: &Stage, packet: &FramePacket) {
        self.publish(topics::TICK_FRAME, packet.to_value(false));
        for o in &packet.outcomes {
            if let Origin::Station { sender, seq } = o.origin {
                let mut ack = vec![
                    ("sender", Value::Int64(i64::from(sender))),
                    ("seq", Value::Int64(seq as i64)),
                    ("ok", Value::Bool(o.result.is_ok())),
                ];
                if let Err(e) = &o.result {
                    ack.push(("error", Value::from(e.as_str())));
                }
                self.publish(CONSOLE_ACK, Value::map(ack));
            }
        }
        if let Some(p) = &packet.progress {
            self.publish(
                topics::PATHFIND_PROGRESS,
                Value::map([
                    ("walked", Value::Float64(p.walked)),
                    ("length", Value::Float64(p.length)),
                    ("complete", Value::Bool(p.complete)),
                ]),
            );
        }
        let per_second = (1.0 / stage.dt()).round().max(1.0) as u64;
        if packet.tick.is_multiple_of(per_second) {
            let meta = stage.mailbox_stats().into_iter().map(|(stream, s, rejected)| {
                (
                    stream,
                    Value::map([
                        ("accepted", Value::Int64(s.accepted as i64)),
                        ("dropped_late", Value::Int64(s.dropped_late as i64)),
                        ("overwritten", Value::Int64(s.overwritten as i64)),
                        ("rejected", Value::Int64(rejected as i64)),
                    ]),
                )
            });
            self.publish(topics::MOCAP_FRAME_META, Value::map(meta));
        }
    }
}

/// Runs the stage until the tick limit or `stop`. Offline runs without a
/// limit stop after `offline_ticks`.
pub fn run(mut stage: Stage, opts: &RunOptions, offline_ticks: u64, stop: StopFlag) -> Result<RunSummary, RunError> {
    let mut log = match &opts.record {
        None => None,
        Some(path) => {
            let file = File::create(path).map_err(|source| RunError::Io {
                what: "creating the packet log",
                source,
            })?;
            Some(PacketLog::new(BufWriter::new(file)))
        }
    };
    let live = opts.is_live();
    let network = if live {
        Some(Network::start(&stage, opts, &stop)?)
    } else {
        None
    };
    let limit = opts.ticks.or(if live { None } else { Some(offline_ticks) });
    let period = Duration::from_secs_f64(stage.dt());
    let start = Instant::now();
    let mut summary = RunSummary::default();

    while limit.is_none_or(|n| summary.ticks < n) && !stop.stopped() {
        if live {
            let due = start + period * summary.ticks as u32;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let live_commands = network.as_ref().map(Network::drain).unwrap_or_default();
        let began = Instant::now();
        let packet = stage.run_tick(live_commands);
        summary.tick_times.push(began.elapsed());
        if let Some(log) = log.as_mut() {
            log.append(&packet)?;
        }
        if let Some(net) = &network {
            net.emit(&stage, &packet);
        }
        summary.ticks += 1;
        summary.last = Some(packet);
    }

    if let Some(log) = log {
        log.into_inner()?;
    }
    stop.stop();
    if let Some(net) = network {
        for t in net.threads {
            let _ = t.join();
        }
        net.session.leave();
    }
    Ok(summary)
}
