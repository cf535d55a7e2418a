#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use futures::StreamExt;
use rehab_core::emg::{FeatureConfig, GestureLabel};
use rehab_core::pipeline::calibrate_from_simulator;
use rehab_core::sim::EmgSynthModel;
use rehab_core::store::{save_db, MIN_CALIBRATION_WINDOWS};
use rehab_service::{ClockConfig, EventHub, ServiceConfig, WireEvent};

/// Writes a database calibrated on simulator output to `dir/templates.json`.
pub fn calibrated_db(dir: &Path, seed: u64) -> std::path::PathBuf {
    let db = calibrate_from_simulator(
        &GestureLabel::TEMPLATE_LABELS,
        5000,
        &EmgSynthModel::with_seed(seed),
        &FeatureConfig::default(),
        MIN_CALIBRATION_WINDOWS,
    )
    .unwrap();
    let path = dir.join("templates.json");
    save_db(&db, &path).unwrap();
    path
}

pub fn config(dir: &Path, db: &Path, factor: f64) -> ServiceConfig {
    ServiceConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        sessions_dir: dir.join("sessions"),
        clock: if factor == 1.0 { ClockConfig::Real } else { ClockConfig::Accelerated(factor) },
        seed: 11,
        ..ServiceConfig::new(db)
    }
}

/// Collects events from `after` until one matches `stop`, or panics after `secs`.
pub async fn collect_until(
    hub: &Arc<EventHub>,
    after: u64,
    secs: u64,
    stop: impl Fn(&WireEvent) -> bool,
) -> Vec<WireEvent> {
    let mut stream = Box::pin(hub.subscribe(after));
    let mut out = Vec::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(secs);
    loop {
        let ev = tokio::time::timeout_at(deadline, stream.next())
            .await
            .unwrap_or_else(|_| panic!("timed out; last events: {:?}", out.iter().rev().take(5).collect::<Vec<_>>()))
            .expect("stream ended");
        let done = stop(&ev);
        out.push(ev);
        if done {
            return out;
        }
    }
}
