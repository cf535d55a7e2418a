use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rehab_core::emg::GestureLabel;
use rehab_core::pipeline::encode_commands;
use rehab_core::protocol::{Command as DeviceCommand, DeviceMessage, FrameReader};
use rehab_core::sim::{TcpTransport, Transport};
use rehab_core::store::load_db;

fn rehab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rehab"))
}

#[test]
fn serve_without_a_database_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("missing.json");
    let out = rehab().args(["serve", "--listen", "127.0.0.1:0", "--db"]).arg(&db).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing.json"), "{stderr}");
}

#[test]
fn calibrate_against_the_simulator_writes_a_database() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("templates.json");
    let out = rehab()
        .args(["calibrate", "--label", "fist", "--label", "rest", "--duration-ms", "3000", "--db"])
        .arg(&db)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let saved = load_db(&db).unwrap();
    assert_eq!(saved.templates.keys().copied().collect::<Vec<_>>(), [GestureLabel::Rest, GestureLabel::Fist]);

    // a second run adds to the same file
    let out = rehab().args(["calibrate", "--label", "all", "--seed", "3", "--db"]).arg(&db).output().unwrap();
    assert!(out.status.success());
    let saved = load_db(&db).unwrap();
    assert_eq!(saved.templates.len(), GestureLabel::TEMPLATE_LABELS.len());
    saved.check_session_ready().unwrap();
}

#[test]
fn calibrate_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("templates.json");
    let bad_label = rehab().args(["calibrate", "--label", "thumbs_up", "--db"]).arg(&db).output().unwrap();
    assert!(!bad_label.status.success());
    let too_short =
        rehab().args(["calibrate", "--label", "fist", "--duration-ms", "100", "--db"]).arg(&db).output().unwrap();
    assert!(!too_short.status.success());
    assert!(!db.exists());
}

#[test]
fn simulate_serves_one_connection() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    std::fs::write(&script, r#"[{"label": "fist", "start_ms": 0, "duration_ms": 500}]"#).unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let child = rehab()
        .args(["simulate", "--once", "--clock", "x10", "--listen", &addr, "--script"])
        .arg(&script)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();

    let deadline = Instant::now() + Duration::from_secs(10);
    let mut link = loop {
        match TcpTransport::connect(&addr) {
            Ok(t) => break t,
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(20)),
            Err(e) => panic!("{e}"),
        }
    };
    link.send(&encode_commands(&[DeviceCommand::STREAM_ALL])).unwrap();
    let mut bytes = Vec::new();
    while let Ok(Some(b)) = link.recv_timeout(Duration::from_secs(5)) {
        bytes.extend(b);
    }

    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let status: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let frames = FrameReader::new().read(&bytes).unwrap();
    let emg = frames.iter().filter(|f| matches!(DeviceMessage::from_frame(f), Ok(DeviceMessage::Emg(_)))).count();
    assert_eq!(status["emg_packets"].as_u64(), Some(emg as u64));
    assert!((49..=51).contains(&emg), "{emg}");
}
