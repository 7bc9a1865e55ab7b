use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use stage_bus::{Role, Session, SessionConfig, Value};

const WAIT: Duration = Duration::from_secs(5);

fn any_port() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

fn pair() -> (Session, Session) {
    let (a, _) = Session::join(SessionConfig::new(1, Role::Server).listen(any_port())).unwrap();
    let addr = a.local_addr().unwrap().to_string();
    let (b, report) = Session::join(SessionConfig::new(2, Role::Manipulator).listen(any_port()).peer(addr)).unwrap();
    assert!(report.warnings.is_empty());
    assert!(a.wait_for_peers(1, WAIT));
    assert!(b.wait_for_peers(1, WAIT));
    (a, b)
}

#[test]
fn subscribe_then_publish_across_stations() {
    let (a, b) = pair();
    let got = Arc::new(Mutex::new(Vec::new()));
    let sink = got.clone();
    let _sub = b
        .subscribe("pathfind/*", move |e| {
            sink.lock().push((e.topic.clone(), e.sender, e.payload.clone()))
        })
        .unwrap();
    assert!(a.wait_for_remote_subscriber("pathfind/takeover", WAIT));
    a.publish("pathfind/takeover", Value::map([("x", Value::Float64(1.5))]))
        .unwrap();
    a.publish("composition/mode", Value::from("Fixed")).unwrap();
    a.publish("pathfind/release", Value::Bool(true)).unwrap();

    let deadline = Instant::now() + WAIT;
    while got.lock().len() < 2 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(1));
    }
    let got = got.lock();
    assert_eq!(got.len(), 2);
    assert_eq!(got[0].0, "pathfind/takeover");
    assert_eq!(got[0].1, 1);
    assert_eq!(got[0].2, Value::map([("x", Value::Float64(1.5))]));
    assert_eq!(got[1].0, "pathfind/release");

    let peers = a.peers();
    assert_eq!(peers.len(), 1);
    assert_eq!(peers[0].station.role, Role::Manipulator);
}

#[test]
fn unreachable_peer_is_a_warning() {
    // bind then drop to get a port nobody listens on
    let dead = std::net::TcpListener::bind(any_port()).unwrap().local_addr().unwrap();
    let (s, report) = Session::join(SessionConfig::new(3, Role::Director).peer(dead.to_string())).unwrap();
    assert_eq!(report.warnings.len(), 1);
    assert_eq!(report.warnings[0].address, dead.to_string());
    assert_eq!(s.publish("tick", Value::Bool(true)).unwrap(), 1);
}

#[test]
fn latency_probe() {
    let (a, _b) = pair();
    a.ping_peers();
    let deadline = Instant::now() + WAIT;
    while a.peers()[0].rtt.is_none() && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(1));
    }
    assert!(a.peers()[0].rtt.is_some());
}

#[test]
fn fifo_under_load() {
    let (a, b) = pair();
    const N: u64 = 10_000;
    let last = Arc::new(AtomicU64::new(0));
    let violations = Arc::new(AtomicU64::new(0));
    let (l, v) = (last.clone(), violations.clone());
    let _sub = b
        .subscribe("load", move |e| {
            let prev = l.swap(e.seq, Ordering::SeqCst);
            if e.seq != prev + 1 {
                v.fetch_add(1, Ordering::SeqCst);
            }
        })
        .unwrap();
    assert!(a.wait_for_remote_subscriber("load", WAIT));
    for i in 0..N {
        a.publish("load", Value::Int64(i as i64)).unwrap();
    }
    let deadline = Instant::now() + Duration::from_secs(20);
    while last.load(Ordering::SeqCst) < N && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(1));
    }
    assert_eq!(last.load(Ordering::SeqCst), N);
    assert_eq!(violations.load(Ordering::SeqCst), 0);
    assert_eq!(b.stats().received, N);
}

#[test]
fn leaving_peer_disappears() {
    let (a, b) = pair();
    b.leave();
    let deadline = Instant::now() + WAIT;
    while !a.peers().is_empty() && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(1));
    }
    assert!(a.peers().is_empty());
}
