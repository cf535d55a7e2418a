mod common;

use std::collections::BTreeMap;
use std::time::Duration;

use rehab_core::emg::GestureLabel;
use rehab_core::session::{ExercisePlan, ExerciseSpec, SessionParams, TimedEvent};
use rehab_core::sim::{run_script, EmgSynthModel, GestureScript, ScaledClock, SessionScriptOptions, TcpTransport};
use rehab_core::store::{load_log, session_log_path};
use rehab_service::{StartupError, TransportConfig, WireEvent};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};

fn counts(events: &[WireEvent]) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for e in events {
        *m.entry(e.kind.as_str()).or_default() += 1;
    }
    m
}

fn short_plan() -> ExercisePlan {
    let mut a = ExerciseSpec::new(GestureLabel::Fist);
    a.sets = 1;
    a.reps_per_set = 2;
    a.hold_s = 2.0;
    ExercisePlan(vec![a])
}

fn assert_gap_free(events: &[WireEvent], first: u64) {
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, first + i as u64);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn autostarted_simulated_session_completes_and_matches_its_log() {
    let dir = tempfile::tempdir().unwrap();
    let db = common::calibrated_db(dir.path(), 1);
    let mut config = common::config(dir.path(), &db, 400.0);
    config.autostart = true;
    let svc = rehab_service::start(config).await.unwrap();

    let events = common::collect_until(&svc.hub, 0, 60, |e| e.kind == "session_completed").await;
    assert_gap_free(&events, 1);
    let c = counts(&events);
    assert_eq!(c.get("rep_counted"), Some(&30), "{c:?}");
    assert_eq!(c.get("set_completed"), Some(&6));
    assert_eq!(c.get("exercise_completed"), Some(&2));
    assert_eq!(c.get("incorrect_movement"), None);
    assert_eq!(c.get("vibrate_requested"), Some(&1));
    assert_eq!(events.last().unwrap().cue.as_deref(), Some("complete"));

    // the last snapshot is published after the completing batch
    let tail = common::collect_until(&svc.hub, events.last().unwrap().seq, 10, |e| e.kind == "snapshot").await;
    assert_eq!(tail.last().unwrap().detail["phase"], "completed");

    let id = events.iter().find(|e| e.kind == "session_started").unwrap().detail["session_id"].as_str().unwrap();
    let log = load_log(&session_log_path(&dir.path().join("sessions"), id)).unwrap();
    let streamed: Vec<TimedEvent> = events.iter().filter_map(WireEvent::feedback).collect();
    assert!(log.completed);
    assert_eq!(log.events, streamed);
    svc.shutdown().await;
}

async fn read_sse(addr: std::net::SocketAddr, path: &str, header: Option<&str>, until_seq: u64) -> Vec<WireEvent> {
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let extra = header.map(|h| format!("{h}\r\n")).unwrap_or_default();
    let req = format!("GET {path} HTTP/1.0\r\nHost: test\r\nAccept: text/event-stream\r\n{extra}\r\n");
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut lines = BufReader::new(stream).lines();
    let status = lines.next_line().await.unwrap().unwrap();
    assert!(status.contains("200"), "{status}");
    let mut out: Vec<WireEvent> = Vec::new();
    let mut id = None;
    while out.last().is_none_or(|e| e.seq < until_seq) {
        let line = tokio::time::timeout(Duration::from_secs(10), lines.next_line()).await.unwrap().unwrap().unwrap();
        if let Some(v) = line.strip_prefix("id:") {
            id = Some(v.trim().parse::<u64>().unwrap());
        } else if let Some(v) = line.strip_prefix("data:") {
            let ev: WireEvent = serde_json::from_str(v.trim()).unwrap();
            assert_eq!(Some(ev.seq), id);
            out.push(ev);
        }
    }
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn event_stream_resumes_after_the_last_seen_event() {
    let dir = tempfile::tempdir().unwrap();
    let db = common::calibrated_db(dir.path(), 2);
    let mut config = common::config(dir.path(), &db, 50.0);
    config.autostart = true;
    let svc = rehab_service::start(config).await.unwrap();
    common::collect_until(&svc.hub, 0, 30, |e| e.kind == "rep_counted").await;
    let last = svc.hub.last_seq();
    assert!(last > 10);

    let full = read_sse(svc.addr, "/api/events", None, last).await;
    assert_gap_free(&full, 1);
    assert_eq!(full[..last as usize], svc.hub.since(0)[..last as usize]);

    let resumed = read_sse(svc.addr, "/api/events", Some("Last-Event-ID: 7"), last).await;
    assert_gap_free(&resumed, 8);
    assert_eq!(resumed[..], full[7..resumed.len() + 7]);

    // the header wins over the query parameter
    let both = read_sse(svc.addr, "/api/events?last_seq=2", Some("Last-Event-ID: 9"), last).await;
    assert_eq!(both[0].seq, 10);
    let query = read_sse(svc.addr, "/api/events?last_seq=4", None, last).await;
    assert_eq!(query[0].seq, 5);
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn link_drop_keeps_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let db = common::calibrated_db(dir.path(), 3);
    let mut config = common::config(dir.path(), &db, 20.0);
    config.autostart = true;
    let svc = rehab_service::start(config).await.unwrap();

    let before = common::collect_until(&svc.hub, 0, 30, |e| e.kind == "rep_counted").await;
    let session_id =
        svc.hub.since(0).iter().find(|e| e.kind == "session_started").unwrap().detail["session_id"].clone();
    svc.drop_link(300);
    let after = svc.hub.last_seq();
    let outage = common::collect_until(&svc.hub, after, 30, |e| e.kind == "device_connected").await;
    assert!(outage.iter().any(|e| e.kind == "device_disconnected" && e.detail["reason"].is_string()));

    let state = svc.engine.request(rehab_service::Request::State).await.unwrap();
    assert_eq!(state["session_id"], session_id);
    assert_ne!(state["phase"], "idle");
    assert!(state["session"]["total_reps_completed"].as_u64().unwrap() >= 1, "{state}");

    // counting carries on where it stopped
    let reps_before = counts(&before)["rep_counted"];
    let resumed = common::collect_until(&svc.hub, svc.hub.last_seq(), 30, |e| e.kind == "rep_counted").await;
    let all = svc.hub.since(0);
    assert_gap_free(&all, 1);
    assert!(counts(&all)["rep_counted"] > reps_before);
    assert!(!resumed.is_empty());
    svc.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn tcp_transport_runs_a_session_against_a_remote_armband() {
    let dir = tempfile::tempdir().unwrap();
    let db = common::calibrated_db(dir.path(), 4);
    let plan_path = dir.path().join("plan.json");
    std::fs::write(&plan_path, serde_json::to_string(&short_plan()).unwrap()).unwrap();

    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let armband = listener.local_addr().unwrap();
    let script =
        GestureScript::perfect_session(&short_plan(), &SessionParams::default(), &SessionScriptOptions::default());
    let device = std::thread::spawn(move || {
        let (s, _) = listener.accept().unwrap();
        let mut t = TcpTransport::new(s).unwrap();
        run_script(script, EmgSynthModel::with_seed(5), &mut t, &mut ScaledClock::new(100.0)).unwrap()
    });

    let mut config = common::config(dir.path(), &db, 1.0);
    config.transport = TransportConfig::Tcp(armband.to_string());
    config.plan_path = Some(plan_path);
    config.autostart = true;
    let svc = rehab_service::start(config).await.unwrap();
    let events = common::collect_until(&svc.hub, 0, 60, |e| e.kind == "session_completed").await;
    assert_eq!(counts(&events).get("rep_counted"), Some(&2));
    let status = tokio::task::spawn_blocking(move || device.join().unwrap()).await.unwrap();
    assert_eq!(status.vibrations.len(), 1);
    assert!(status.synced);
    svc.shutdown().await;
}

#[tokio::test]
async fn missing_database_is_a_startup_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::config(dir.path(), &dir.path().join("nope.json"), 1.0);
    match rehab_service::start(config).await {
        Err(StartupError::Database { path, .. }) => assert!(path.ends_with("nope.json")),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("started without a database"),
    }
}
