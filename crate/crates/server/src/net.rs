//! Network edges: the UDP mocap receiver and the WebSocket console gateway.
//! Both only deposit data (device frames into mailboxes, envelopes onto the
//! bus); the tick loop alone changes stage state.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde_json::json;
use stage_bus::{topics, Envelope, Role, Session, StationRegistry, Subscription, Value};
use stage_core::capture::{decode_device_frame, FrameMailbox, MAX_DEVICE_FRAME_LEN};
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::{Message, WebSocket};

pub const CONSOLE_ACK: &str = "console/ack";
pub const CONSOLE_WELCOME: &str = "console/welcome";
pub const CONSOLE_ERROR: &str = "console/error";
pub const DEFAULT_DECIMATION: u64 = 6;

const POLL: Duration = Duration::from_millis(20);

/// Stops background threads when dropped or when `stop` is called.
#[derive(Debug, Clone, Default)]
pub struct StopFlag(Arc<AtomicBool>);

impl StopFlag {
    pub fn stop(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn stopped(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

fn now_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Receives device frames and offers each to the mailbox of its stream.
pub fn spawn_mocap_listener(
    addr: SocketAddr,
    mailboxes: Vec<(String, Arc<FrameMailbox>)>,
    stop: StopFlag,
) -> io::Result<(SocketAddr, JoinHandle<()>)> {
    let socket = UdpSocket::bind(addr)?;
    socket.set_read_timeout(Some(POLL))?;
    let local = socket.local_addr()?;
    let handle = std::thread::spawn(move || {
        let mut buf = vec![0u8; MAX_DEVICE_FRAME_LEN + 1];
        while !stop.stopped() {
            let n = match socket.recv_from(&mut buf) {
                Ok((n, _)) => n,
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
                Err(e) => {
                    log::error!("mocap socket: {e}");
                    break;
                }
            };
            match decode_device_frame(&buf[..n]) {
                Ok(frame) => match mailboxes.iter().find(|(id, _)| *id == frame.stream_id) {
                    Some((_, mailbox)) => {
                        mailbox.offer(frame);
                    }
                    None => log::debug!("frame for unknown stream {:?}", frame.stream_id),
                },
                Err(e) => log::debug!("bad device frame: {e}"),
            }
        }
    });
    Ok((local, handle))
}

/// A console message, `{"topic", "seq", "payload"}`.
pub fn console_message(topic: &str, seq: u64, payload: serde_json::Value) -> String {
    json!({ "topic": topic, "seq": seq, "payload": payload }).to_string()
}

/// Turns a console message into a bus envelope sent by `station`.
pub fn envelope_from_console(text: &str, station: u32) -> Result<Envelope, String> {
    let msg: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let topic = msg
        .get("topic")
        .and_then(|t| t.as_str())
        .ok_or("missing string field \"topic\"")?;
    let seq = msg
        .get("seq")
        .and_then(|s| s.as_u64())
        .ok_or("missing integer field \"seq\"")?;
    let payload = match msg.get("payload") {
        None | Some(serde_json::Value::Null) => Value::map::<String>([]),
        Some(p) => Value::from_json(p).map_err(|e| e.to_string())?,
    };
    Ok(Envelope {
        topic: topic.to_owned(),
        sender: station,
        seq,
        timestamp: now_seconds(),
        payload,
    })
}

/// Turns a bus envelope into a console message.
pub fn console_from_envelope(env: &Envelope) -> Option<String> {
    let payload = env.payload.to_json().ok()?;
    Some(
        json!({
            "topic": env.topic,
            "sender": env.sender,
            "seq": env.seq,
            "payload": payload,
        })
        .to_string(),
    )
}

/// Shared station roster: console connections register here.
pub type Roster = Arc<Mutex<StationRegistry>>;

/// Accepts console WebSocket connections, one thread each. The role comes
/// from the `role` query parameter, e.g. `ws://host:port/?role=Manipulator`.
pub fn spawn_console_gateway(
    addr: SocketAddr,
    session: Arc<Session>,
    roster: Roster,
    decimation: u64,
    stop: StopFlag,
) -> io::Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let handle = std::thread::spawn(move || {
        while !stop.stopped() {
            match listener.accept() {
                Ok((stream, peer)) => {
                    let (session, roster, stop) = (session.clone(), roster.clone(), stop.clone());
                    std::thread::spawn(move || {
                        if let Err(e) = serve_console(stream, session, roster, decimation.max(1), stop) {
                            log::info!("console {peer}: {e}");
                        }
                    });
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => std::thread::sleep(POLL),
                Err(e) => {
                    log::error!("console listener: {e}");
                    break;
                }
            }
        }
    });
    Ok((local, handle))
}

fn query_role(req: &Request) -> Option<String> {
    req.uri()
        .query()?
        .split('&')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == "role")
        .map(|(_, v)| v.to_owned())
}

#[allow(clippy::result_large_err)]
fn send(ws: &mut WebSocket<TcpStream>, text: String) -> Result<(), tungstenite::Error> {
    ws.send(Message::text(text))
}

#[allow(clippy::result_large_err)]
fn serve_console(
    stream: TcpStream,
    session: Arc<Session>,
    roster: Roster,
    decimation: u64,
    stop: StopFlag,
) -> Result<(), String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    let mut role_text = None;
    let callback = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        role_text = query_role(req);
        Ok(resp)
    };
    let mut ws = tungstenite::accept_hdr(stream, callback).map_err(|e| e.to_string())?;

    let role = match role_text.as_deref().map(str::parse::<Role>) {
        Some(Ok(r @ (Role::Manipulator | Role::Director | Role::DigitalArtist))) => r,
        other => {
            let error = match other {
                None => "missing role query parameter".to_owned(),
                Some(Ok(r)) => format!("role {r} cannot use the console"),
                Some(Err(e)) => e.to_string(),
            };
            let _ = send(&mut ws, console_message(CONSOLE_ERROR, 0, json!({ "error": error })));
            let _ = ws.close(None);
            return Err(error);
        }
    };
    let registered = roster.lock().register(role, "");
    let station = match registered {
        Ok(id) => id,
        Err(e) => {
            let _ = send(
                &mut ws,
                console_message(CONSOLE_ERROR, 0, json!({ "error": e.to_string() })),
            );
            let _ = ws.close(None);
            return Err(e.to_string());
        }
    };
    log::info!("console station {station} joined as {role}");
    let result = console_loop(&mut ws, &session, station, role, decimation, &stop);
    let _ = roster.lock().remove(station);
    log::info!("console station {station} left");
    result
}

fn console_loop(
    ws: &mut WebSocket<TcpStream>,
    session: &Session,
    station: u32,
    role: Role,
    decimation: u64,
    stop: &StopFlag,
) -> Result<(), String> {
    let (tx, rx) = mpsc::channel::<String>();
    let tx = Arc::new(Mutex::new(tx));
    let mut subs: Vec<Subscription> = Vec::new();
    let forward = |pattern: &str, filter: Box<dyn Fn(&Envelope) -> bool + Send + Sync>| {
        let tx = tx.clone();
        session.subscribe(pattern, move |env| {
            if filter(env) {
                if let Some(text) = console_from_envelope(env) {
                    let _ = tx.lock().send(text);
                }
            }
        })
    };
    let sub = |r: Result<Subscription, stage_bus::BusError>| r.map_err(|e| e.to_string());
    subs.push(sub(forward(
        topics::TICK_FRAME,
        Box::new(move |e| {
            e.payload
                .get("tick")
                .and_then(Value::as_i64)
                .is_some_and(|t| (t as u64).is_multiple_of(decimation))
        }),
    ))?);
    subs.push(sub(forward(
        CONSOLE_ACK,
        Box::new(move |e| e.payload.get("sender").and_then(Value::as_i64) == Some(i64::from(station))),
    ))?);
    subs.push(sub(forward(topics::PATHFIND_PROGRESS, Box::new(|_| true)))?);
    subs.push(sub(forward(topics::MOCAP_FRAME_META, Box::new(|_| true)))?);

    let welcome = json!({ "station": station, "role": role.name(), "decimation": decimation });
    send(ws, console_message(CONSOLE_WELCOME, 0, welcome)).map_err(|e| e.to_string())?;
    ws.get_ref().set_read_timeout(Some(POLL)).map_err(|e| e.to_string())?;

    while !stop.stopped() {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let outcome = envelope_from_console(text.as_str(), station)
                    .and_then(|env| session.inject(env).map_err(|e| e.to_string()));
                if let Err(error) = outcome {
                    let seq = serde_json::from_str::<serde_json::Value>(text.as_str())
                        .ok()
                        .and_then(|m| m.get("seq").and_then(|s| s.as_u64()))
                        .unwrap_or(0);
                    let ack = json!({ "sender": station, "seq": seq, "ok": false, "error": error });
                    send(ws, console_message(CONSOLE_ACK, seq, ack)).map_err(|e| e.to_string())?;
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => return Err(e.to_string()),
        }
        while let Ok(text) = rx.try_recv() {
            send(ws, text).map_err(|e| e.to_string())?;
        }
    }
    drop(subs);
    Ok(())
}
