//! A station's membership in the TCP peer mesh.
//!
//! Every station connects out to each listed peer and accepts connections
//! from the others. On each connection it first sends `$hello` with its
//! descriptor and `$subs` with its subscription table. Events go straight
//! to the peers whose tables match, over the first connection that
//! identified each peer, so any one sender's events arrive in order.
//! Incoming events are dispatched immediately on the receiving thread under
//! the station's dispatch lock.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, ReentrantMutex};
use thiserror::Error;

use crate::envelope::{decode_envelope_body, encode_envelope, Envelope, EnvelopeError, MAX_ENVELOPE_BYTES};
use crate::station::{Role, StationDescriptor};
use crate::topic::{PatternError, TopicPattern};
use crate::value::Value;

pub const HELLO: &str = "$hello";
pub const SUBS: &str = "$subs";
pub const PING: &str = "$ping";
pub const PONG: &str = "$pong";

/// Handlers running at least this long are reported in debug builds.
pub const HANDLER_BUDGET: Duration = Duration::from_millis(1);

#[derive(Debug, Error)]
pub enum BusError {
    #[error("station is not joined to a session")]
    NotJoined,
    #[error("frame of {0} bytes exceeds the {MAX_ENVELOPE_BYTES}-byte cap")]
    PayloadTooLarge(usize),
    #[error("topics starting with '$' are reserved: {0:?}")]
    ReservedTopic(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Envelope(EnvelopeError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<EnvelopeError> for BusError {
    fn from(e: EnvelopeError) -> Self {
        match e {
            EnvelopeError::PayloadTooLarge(n) => BusError::PayloadTooLarge(n),
            other => BusError::Envelope(other),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub station: StationDescriptor,
    /// Where to accept peer connections; `None` for outbound only.
    pub listen: Option<SocketAddr>,
    pub peers: Vec<String>,
    pub connect_timeout: Duration,
}

impl SessionConfig {
    pub fn new(id: u32, role: Role) -> Self {
        Self {
            station: StationDescriptor {
                id,
                role,
                address: String::new(),
            },
            listen: None,
            peers: Vec::new(),
            connect_timeout: Duration::from_millis(500),
        }
    }

    pub fn listen(mut self, addr: SocketAddr) -> Self {
        self.listen = Some(addr);
        self
    }

    pub fn peer(mut self, addr: impl Into<String>) -> Self {
        self.peers.push(addr.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerWarning {
    pub address: String,
    pub error: String,
}

/// Outcome of joining: the peers that could not be reached.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JoinReport {
    pub warnings: Vec<PeerWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeerInfo {
    pub station: StationDescriptor,
    pub patterns: Vec<TopicPattern>,
    /// Round trip of the latest answered ping.
    pub rtt: Option<Duration>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub published: u64,
    pub received: u64,
    pub handler_calls: u64,
    pub slow_handlers: u64,
}

type Handler = Arc<dyn Fn(&Envelope) + Send + Sync>;

struct SubEntry {
    id: u64,
    pattern: TopicPattern,
    handler: Handler,
}

#[derive(Default)]
struct SubTable {
    entries: Vec<SubEntry>,
    next_id: u64,
    version: i64,
}

struct Link {
    writer: Mutex<TcpStream>,
    peer: Mutex<Option<u32>>,
}

impl Link {
    fn send(&self, frame: &[u8]) -> io::Result<()> {
        self.writer.lock().write_all(frame)
    }

    fn close(&self) {
        let _ = self.writer.lock().shutdown(Shutdown::Both);
    }
}

struct PeerState {
    station: StationDescriptor,
    links: Vec<Arc<Link>>,
    patterns: Vec<TopicPattern>,
    subs_version: i64,
    rtt: Option<Duration>,
}

#[derive(Default)]
struct DispatchState {
    active: bool,
    pending: VecDeque<Envelope>,
}

struct Inner {
    station: StationDescriptor,
    joined: AtomicBool,
    seq: AtomicU64,
    dispatch: ReentrantMutex<RefCell<DispatchState>>,
    subs: Mutex<SubTable>,
    peers: Mutex<BTreeMap<u32, PeerState>>,
    links: Mutex<Vec<Arc<Link>>>,
    pings: Mutex<HashMap<i64, Instant>>,
    next_nonce: AtomicU64,
    stats: Mutex<SessionStats>,
    local_addr: Option<SocketAddr>,
}

/// A joined station. Dropping it leaves the session.
pub struct Session {
    inner: Arc<Inner>,
}

/// Keeps a handler registered; dropping it unsubscribes once any dispatch
/// in progress has finished.
#[must_use = "dropping a subscription unsubscribes it"]
pub struct Subscription {
    inner: Weak<Inner>,
    id: u64,
}

impl Drop for Subscription {
    fn drop(&mut self) {
        if let Some(inner) = self.inner.upgrade() {
            let _dispatch = inner.dispatch.lock();
            inner.subs.lock().entries.retain(|e| e.id != self.id);
            inner.announce_subs();
        }
    }
}

fn now_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl Session {
    pub fn join(config: SessionConfig) -> Result<(Session, JoinReport), BusError> {
        let listener = config.listen.map(TcpListener::bind).transpose()?;
        let local_addr = listener.as_ref().map(TcpListener::local_addr).transpose()?;
        let mut station = config.station.clone();
        if station.address.is_empty() {
            if let Some(a) = local_addr {
                station.address = a.to_string();
            }
        }
        let inner = Arc::new(Inner {
            station,
            joined: AtomicBool::new(true),
            seq: AtomicU64::new(0),
            dispatch: ReentrantMutex::new(RefCell::new(DispatchState::default())),
            subs: Mutex::new(SubTable::default()),
            peers: Mutex::new(BTreeMap::new()),
            links: Mutex::new(Vec::new()),
            pings: Mutex::new(HashMap::new()),
            next_nonce: AtomicU64::new(1),
            stats: Mutex::new(SessionStats::default()),
            local_addr,
        });

        if let Some(listener) = listener {
            let weak = Arc::downgrade(&inner);
            thread::Builder::new()
                .name(format!("bus-accept-{}", inner.station.id))
                .spawn(move || accept_loop(listener, weak))?;
        }

        let mut report = JoinReport::default();
        for address in &config.peers {
            match connect(address, config.connect_timeout) {
                Ok(stream) => {
                    if let Err(e) = Inner::add_link(&inner, stream) {
                        report.warnings.push(PeerWarning {
                            address: address.clone(),
                            error: e.to_string(),
                        });
                    }
                }
                Err(e) => {
                    log::warn!("peer {address} unreachable: {e}");
                    report.warnings.push(PeerWarning {
                        address: address.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
        Ok((Session { inner }, report))
    }

    pub fn station(&self) -> &StationDescriptor {
        &self.inner.station
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.inner.local_addr
    }

    pub fn is_joined(&self) -> bool {
        self.inner.joined.load(Ordering::SeqCst)
    }

    pub fn publish(&self, topic: &str, payload: Value) -> Result<u64, BusError> {
        self.publish_at(topic, payload, now_seconds())
    }

    /// Publishes with an explicit timestamp and returns the sequence number.
    /// Local subscribers have run by the time this returns.
    pub fn publish_at(&self, topic: &str, payload: Value, timestamp: f64) -> Result<u64, BusError> {
        if !self.is_joined() {
            return Err(BusError::NotJoined);
        }
        if topic.starts_with('$') {
            return Err(BusError::ReservedTopic(topic.to_owned()));
        }
        let inner = &self.inner;
        let _dispatch = inner.dispatch.lock();
        let seq = inner.seq.load(Ordering::SeqCst) + 1;
        let env = Envelope {
            topic: topic.to_owned(),
            sender: inner.station.id,
            seq,
            timestamp,
            payload,
        };
        let frame = encode_envelope(&env)?;
        inner.seq.store(seq, Ordering::SeqCst);
        inner.stats.lock().published += 1;
        inner.send_to_subscribers(&env.topic, &frame, None);
        inner.deliver_local(env);
        Ok(seq)
    }

    /// Dispatches an envelope produced elsewhere, such as by a console
    /// station speaking through a gateway, keeping its sender and seq. It is
    /// forwarded to subscribed peers other than its sender.
    pub fn inject(&self, env: Envelope) -> Result<(), BusError> {
        if !self.is_joined() {
            return Err(BusError::NotJoined);
        }
        if env.topic.starts_with('$') {
            return Err(BusError::ReservedTopic(env.topic));
        }
        let frame = encode_envelope(&env)?;
        let _dispatch = self.inner.dispatch.lock();
        self.inner.send_to_subscribers(&env.topic, &frame, Some(env.sender));
        self.inner.deliver_local(env);
        Ok(())
    }

    pub fn subscribe(
        &self,
        pattern: &str,
        handler: impl Fn(&Envelope) + Send + Sync + 'static,
    ) -> Result<Subscription, BusError> {
        if !self.is_joined() {
            return Err(BusError::NotJoined);
        }
        let pattern = TopicPattern::parse(pattern)?;
        if pattern.to_string().starts_with('$') {
            return Err(BusError::ReservedTopic(pattern.to_string()));
        }
        let id = {
            let mut subs = self.inner.subs.lock();
            subs.next_id += 1;
            let id = subs.next_id;
            subs.entries.push(SubEntry {
                id,
                pattern,
                handler: Arc::new(handler),
            });
            id
        };
        self.inner.announce_subs();
        Ok(Subscription {
            inner: Arc::downgrade(&self.inner),
            id,
        })
    }

    pub fn peers(&self) -> Vec<PeerInfo> {
        self.inner
            .peers
            .lock()
            .values()
            .map(|p| PeerInfo {
                station: p.station.clone(),
                patterns: p.patterns.clone(),
                rtt: p.rtt,
            })
            .collect()
    }

    /// True once some peer has announced a subscription matching `topic`.
    pub fn has_remote_subscriber(&self, topic: &str) -> bool {
        self.inner
            .peers
            .lock()
            .values()
            .any(|p| p.patterns.iter().any(|pat| pat.matches(topic)))
    }

    pub fn wait_for_remote_subscriber(&self, topic: &str, timeout: Duration) -> bool {
        wait_until(timeout, || self.has_remote_subscriber(topic))
    }

    pub fn wait_for_peers(&self, count: usize, timeout: Duration) -> bool {
        wait_until(timeout, || self.inner.peers.lock().len() >= count)
    }

    /// Sends a ping to every peer; answers update [`PeerInfo::rtt`].
    pub fn ping_peers(&self) {
        let targets: Vec<Arc<Link>> = self
            .inner
            .peers
            .lock()
            .values()
            .filter_map(|p| p.links.first().cloned())
            .collect();
        for link in targets {
            let nonce = self.inner.next_nonce.fetch_add(1, Ordering::SeqCst) as i64;
            self.inner.pings.lock().insert(nonce, Instant::now());
            let payload = Value::map([("nonce", Value::Int64(nonce))]);
            if let Ok(frame) = self.inner.control_frame(PING, payload) {
                let _ = link.send(&frame);
            }
        }
    }

    pub fn stats(&self) -> SessionStats {
        *self.inner.stats.lock()
    }

    pub fn leave(&self) {
        self.inner.leave();
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.inner.leave();
    }
}

fn wait_until(timeout: Duration, mut done: impl FnMut() -> bool) -> bool {
    let deadline = Instant::now() + timeout;
    loop {
        if done() {
            return true;
        }
        if Instant::now() >= deadline {
            return false;
        }
        thread::sleep(Duration::from_millis(1));
    }
}

fn connect(address: &str, timeout: Duration) -> io::Result<TcpStream> {
    let mut last = io::Error::new(io::ErrorKind::NotFound, "address resolved to nothing");
    for addr in address.to_socket_addrs()? {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(s) => return Ok(s),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn accept_loop(listener: TcpListener, inner: Weak<Inner>) {
    for stream in listener.incoming() {
        let Some(inner) = inner.upgrade() else { return };
        if !inner.joined.load(Ordering::SeqCst) {
            return;
        }
        match stream {
            Ok(s) => {
                if let Err(e) = Inner::add_link(&inner, s) {
                    log::warn!("inbound connection failed: {e}");
                }
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

fn read_frame(stream: &mut TcpStream) -> io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    stream.read_exact(&mut len)?;
    let n = u32::from_le_bytes(len) as usize;
    if n + 4 > MAX_ENVELOPE_BYTES {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {} bytes", n + 4),
        ));
    }
    let mut body = vec![0u8; n];
    stream.read_exact(&mut body)?;
    Ok(body)
}

impl Inner {
    fn add_link(inner: &Arc<Inner>, stream: TcpStream) -> io::Result<()> {
        stream.set_nodelay(true)?;
        let mut reader = stream.try_clone()?;
        let link = Arc::new(Link {
            writer: Mutex::new(stream),
            peer: Mutex::new(None),
        });
        inner.links.lock().push(link.clone());
        let hello = inner
            .control_frame(HELLO, inner.hello_payload())
            .map_err(io::Error::other)?;
        link.send(&hello)?;
        let subs = inner
            .control_frame(SUBS, inner.subs_payload())
            .map_err(io::Error::other)?;
        link.send(&subs)?;

        let weak = Arc::downgrade(inner);
        thread::Builder::new()
            .name(format!("bus-link-{}", inner.station.id))
            .spawn(move || {
                while let Ok(body) = read_frame(&mut reader) {
                    let Some(inner) = weak.upgrade() else { break };
                    match decode_envelope_body(&body) {
                        Ok(env) => inner.receive(&link, env),
                        Err(e) => {
                            log::warn!("dropping undecodable frame: {e}");
                            break;
                        }
                    }
                }
                if let Some(inner) = weak.upgrade() {
                    inner.drop_link(&link);
                }
            })?;
        Ok(())
    }

    fn drop_link(&self, link: &Arc<Link>) {
        link.close();
        self.links.lock().retain(|l| !Arc::ptr_eq(l, link));
        let Some(id) = *link.peer.lock() else { return };
        let mut peers = self.peers.lock();
        if let Some(p) = peers.get_mut(&id) {
            p.links.retain(|l| !Arc::ptr_eq(l, link));
            if p.links.is_empty() {
                peers.remove(&id);
                log::info!("station {id} left");
            }
        }
    }

    fn leave(&self) {
        if !self.joined.swap(false, Ordering::SeqCst) {
            return;
        }
        for link in self.links.lock().drain(..) {
            link.close();
        }
        self.peers.lock().clear();
        if let Some(addr) = self.local_addr {
            // wakes the accept loop so it can observe the flag
            let wake = if addr.ip().is_unspecified() {
                SocketAddr::new([127, 0, 0, 1].into(), addr.port())
            } else {
                addr
            };
            let _ = TcpStream::connect_timeout(&wake, Duration::from_millis(100));
        }
    }

    fn control_frame(&self, topic: &str, payload: Value) -> Result<Vec<u8>, EnvelopeError> {
        encode_envelope(&Envelope {
            topic: topic.to_owned(),
            sender: self.station.id,
            seq: 0,
            timestamp: now_seconds(),
            payload,
        })
    }

    fn hello_payload(&self) -> Value {
        Value::map([
            ("id", Value::Int64(i64::from(self.station.id))),
            ("role", Value::from(self.station.role.name())),
            ("address", Value::from(self.station.address.as_str())),
        ])
    }

    fn subs_payload(&self) -> Value {
        let subs = self.subs.lock();
        let patterns = subs.entries.iter().map(|e| (e.pattern.to_string(), Value::Bool(true)));
        Value::map([
            ("version", Value::Int64(subs.version)),
            ("patterns", Value::map(patterns)),
        ])
    }

    fn announce_subs(&self) {
        self.subs.lock().version += 1;
        let Ok(frame) = self.control_frame(SUBS, self.subs_payload()) else {
            return;
        };
        for link in self.links.lock().iter() {
            let _ = link.send(&frame);
        }
    }

    fn send_to_subscribers(&self, topic: &str, frame: &[u8], skip: Option<u32>) {
        let targets: Vec<(u32, Arc<Link>)> = self
            .peers
            .lock()
            .iter()
            .filter(|(id, p)| Some(**id) != skip && p.patterns.iter().any(|pat| pat.matches(topic)))
            .filter_map(|(id, p)| p.links.first().map(|l| (*id, l.clone())))
            .collect();
        for (id, link) in targets {
            if let Err(e) = link.send(frame) {
                log::warn!("send to station {id} failed: {e}");
            }
        }
    }

    fn receive(&self, link: &Arc<Link>, env: Envelope) {
        match env.topic.as_str() {
            HELLO => self.on_hello(link, &env),
            SUBS => self.on_subs(link, &env),
            PING => {
                if let Ok(frame) = self.control_frame(PONG, env.payload) {
                    let _ = link.send(&frame);
                }
            }
            PONG => {
                let nonce = env.payload.get("nonce").and_then(Value::as_i64);
                let sent = nonce.and_then(|n| self.pings.lock().remove(&n));
                if let (Some(sent), Some(id)) = (sent, *link.peer.lock()) {
                    if let Some(p) = self.peers.lock().get_mut(&id) {
                        p.rtt = Some(sent.elapsed());
                    }
                }
            }
            t if t.starts_with('$') => log::debug!("ignoring control topic {t}"),
            _ => {
                self.stats.lock().received += 1;
                let _dispatch = self.dispatch.lock();
                self.deliver_local(env);
            }
        }
    }

    fn on_hello(&self, link: &Arc<Link>, env: &Envelope) {
        let id = env
            .payload
            .get("id")
            .and_then(Value::as_i64)
            .and_then(|i| u32::try_from(i).ok());
        let role = env
            .payload
            .get("role")
            .and_then(Value::as_str)
            .and_then(|r| r.parse::<Role>().ok());
        let (Some(id), Some(role)) = (id, role) else {
            log::warn!("malformed hello");
            return;
        };
        if id == self.station.id {
            log::debug!("closing connection to self");
            link.close();
            return;
        }
        let address = env
            .payload
            .get("address")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_owned();
        *link.peer.lock() = Some(id);
        let mut peers = self.peers.lock();
        let peer = peers.entry(id).or_insert_with(|| {
            log::info!("station {id} ({role}) joined");
            PeerState {
                station: StationDescriptor { id, role, address },
                links: Vec::new(),
                patterns: Vec::new(),
                subs_version: -1,
                rtt: None,
            }
        });
        peer.links.push(link.clone());
    }

    fn on_subs(&self, link: &Arc<Link>, env: &Envelope) {
        let Some(id) = *link.peer.lock() else { return };
        let version = env.payload.get("version").and_then(Value::as_i64).unwrap_or(0);
        let patterns: Vec<TopicPattern> = env
            .payload
            .get("patterns")
            .and_then(Value::as_map)
            .map(|m| m.keys().filter_map(|k| TopicPattern::parse(k).ok()).collect())
            .unwrap_or_default();
        if let Some(p) = self.peers.lock().get_mut(&id) {
            if version > p.subs_version {
                p.subs_version = version;
                p.patterns = patterns;
            }
        }
    }

    /// Runs matching handlers. Envelopes published from inside a handler are
    /// delivered after the current one has reached every handler. The caller
    /// holds the dispatch lock.
    fn deliver_local(&self, env: Envelope) {
        let guard = self.dispatch.lock();
        {
            let mut state = guard.borrow_mut();
            if state.active {
                state.pending.push_back(env);
                return;
            }
            state.active = true;
        }
        let mut next = Some(env);
        while let Some(env) = next {
            self.run_handlers(&env);
            next = guard.borrow_mut().pending.pop_front();
        }
        guard.borrow_mut().active = false;
    }

    fn run_handlers(&self, env: &Envelope) {
        let handlers: Vec<Handler> = self
            .subs
            .lock()
            .entries
            .iter()
            .filter(|e| e.pattern.matches(&env.topic))
            .map(|e| e.handler.clone())
            .collect();
        for h in handlers {
            let start = Instant::now();
            h(env);
            let took = start.elapsed();
            let mut stats = self.stats.lock();
            stats.handler_calls += 1;
            if cfg!(debug_assertions) && took >= HANDLER_BUDGET {
                stats.slow_handlers += 1;
                log::warn!("handler for {} took {:?}", env.topic, took);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::mpsc;

    fn solo(id: u32) -> Session {
        Session::join(SessionConfig::new(id, Role::Server)).unwrap().0
    }

    #[test]
    fn loops_back_locally() {
        let s = solo(1);
        let (tx, rx) = mpsc::channel();
        let tx = Mutex::new(tx);
        let _sub = s
            .subscribe("pathfind/*", move |e| tx.lock().send(e.topic.clone()).unwrap())
            .unwrap();
        s.publish("pathfind/takeover", Value::Bool(true)).unwrap();
        s.publish("pathfind/release", Value::Bool(true)).unwrap();
        s.publish("tick/frame", Value::Bool(true)).unwrap();
        let got: Vec<String> = rx.try_iter().collect();
        assert_eq!(got, ["pathfind/takeover", "pathfind/release"]);
    }

    #[test]
    fn publish_without_subscribers() {
        let s = solo(1);
        assert_eq!(s.publish("tick", Value::Int64(1)).unwrap(), 1);
        assert_eq!(s.publish("tick", Value::Int64(2)).unwrap(), 2);
    }

    #[test]
    fn errors() {
        let s = solo(1);
        assert!(matches!(s.subscribe("", |_| {}), Err(BusError::Pattern(_))));
        assert!(matches!(
            s.publish("$hello", Value::Bool(true)),
            Err(BusError::ReservedTopic(_))
        ));
        let big = Value::Float32Array(vec![0.0; 4000]);
        assert!(matches!(s.publish("tick", big), Err(BusError::PayloadTooLarge(_))));
        // the rejected event consumed no sequence number
        assert_eq!(s.publish("tick", Value::Bool(true)).unwrap(), 1);
        s.leave();
        assert!(matches!(s.publish("tick", Value::Bool(true)), Err(BusError::NotJoined)));
    }

    #[test]
    fn unsubscribe_stops_delivery() {
        let s = solo(1);
        let count = Arc::new(AtomicU64::new(0));
        let c = count.clone();
        let sub = s
            .subscribe("tick", move |_| {
                c.fetch_add(1, Ordering::SeqCst);
            })
            .unwrap();
        s.publish("tick", Value::Bool(true)).unwrap();
        drop(sub);
        s.publish("tick", Value::Bool(true)).unwrap();
        assert_eq!(count.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn nested_publish_keeps_order() {
        let s = Arc::new(solo(1));
        let seen = Arc::new(Mutex::new(Vec::new()));
        let weak = Arc::downgrade(&s);
        let _first = s
            .subscribe("a", move |_| {
                if let Some(s) = weak.upgrade() {
                    s.publish("a/echo", Value::Bool(true)).unwrap();
                }
            })
            .unwrap();
        let log = seen.clone();
        let _all = s.subscribe("a", move |e| log.lock().push(e.seq)).unwrap();
        let log = seen.clone();
        let _echo = s.subscribe("a/*", move |e| log.lock().push(e.seq)).unwrap();
        s.publish("a", Value::Bool(true)).unwrap();
        assert_eq!(*seen.lock(), vec![1, 2]);
    }
}
