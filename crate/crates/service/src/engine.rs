//! The engine loop: sole owner of the pipeline, session and log. Link
//! events and HTTP requests reach it as messages.

use std::path::PathBuf;
use std::sync::mpsc::Sender;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rehab_core::emg::GestureLabel;
use rehab_core::pipeline::{encode_commands, HostPipeline, PipelineError};
use rehab_core::session::{ExercisePlan, FeedbackEvent, PlanFile, SessionParams};
use rehab_core::sim::{GestureScript, ScriptEntry, SessionScriptOptions};
use rehab_core::store::{save_db, save_log, session_log_path, SessionLog, StoreError, MIN_CALIBRATION_WINDOWS};
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot};

use crate::error::ApiError;
use crate::hub::EventHub;
use crate::link::{LinkCtl, LinkEvent};

/// Engine time between progress snapshots while a hold is under way.
const PROGRESS_INTERVAL_US: u64 = 250_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    State,
    Plan,
    /// Raw request body: empty for the configured plan, else a plan file.
    StartSession(String),
    Abort,
    CalibrationStart(String),
    CalibrationStop(String),
}

#[derive(Debug)]
pub enum EngineMsg {
    Link(LinkEvent),
    Request(Request, oneshot::Sender<Result<Value, ApiError>>),
    Shutdown,
}

#[derive(Debug, Clone)]
pub struct EngineHandle {
    tx: mpsc::UnboundedSender<EngineMsg>,
}

impl EngineHandle {
    pub async fn request(&self, r: Request) -> Result<Value, ApiError> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(EngineMsg::Request(r, tx)).map_err(|_| ApiError::unavailable())?;
        rx.await.map_err(|_| ApiError::unavailable())?
    }

    pub fn link_event(&self, e: LinkEvent) -> bool {
        self.tx.send(EngineMsg::Link(e)).is_ok()
    }

    pub fn shutdown(&self) {
        let _ = self.tx.send(EngineMsg::Shutdown);
    }
}

pub fn channel() -> (EngineHandle, mpsc::UnboundedReceiver<EngineMsg>) {
    let (tx, rx) = mpsc::unbounded_channel();
    (EngineHandle { tx }, rx)
}

/// What the simulated wearer does on cue. `None` for a real device.
#[derive(Debug, Clone)]
pub struct WearerCues {
    pub session_script: Option<GestureScript>,
    pub calibration_ms: u64,
}

pub struct Engine {
    pipeline: HostPipeline,
    hub: Arc<EventHub>,
    link: Sender<LinkCtl>,
    plan: ExercisePlan,
    params: SessionParams,
    db_path: PathBuf,
    sessions_dir: PathBuf,
    wearer: Option<WearerCues>,
    connected: bool,
    session_id: Option<String>,
    log: Option<SessionLog>,
    last_progress_us: u64,
}

impl Engine {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pipeline: HostPipeline,
        hub: Arc<EventHub>,
        link: Sender<LinkCtl>,
        plan: ExercisePlan,
        params: SessionParams,
        db_path: PathBuf,
        sessions_dir: PathBuf,
        wearer: Option<WearerCues>,
    ) -> Self {
        Self {
            pipeline,
            hub,
            link,
            plan,
            params,
            db_path,
            sessions_dir,
            wearer,
            connected: false,
            session_id: None,
            log: None,
            last_progress_us: 0,
        }
    }

    pub async fn run(mut self, mut rx: mpsc::UnboundedReceiver<EngineMsg>) {
        while let Some(msg) = rx.recv().await {
            match msg {
                EngineMsg::Link(e) => self.on_link(e),
                EngineMsg::Request(r, reply) => {
                    let _ = reply.send(self.handle(r));
                }
                EngineMsg::Shutdown => break,
            }
        }
    }

    pub fn handle(&mut self, r: Request) -> Result<Value, ApiError> {
        match r {
            Request::State => Ok(self.state()),
            Request::Plan => Ok(json!({ "exercises": self.plan, "params": self.params })),
            Request::StartSession(body) => self.start_session(&body),
            Request::Abort => self.abort(),
            Request::CalibrationStart(label) => self.calibration_start(&label),
            Request::CalibrationStop(label) => self.calibration_stop(&label),
        }
    }

    fn now(&self) -> u64 {
        self.pipeline.now_us()
    }

    fn status(&self, kind: &str, detail: Value) {
        self.hub.publish(self.now(), kind, detail, None);
    }

    fn cue(&self, script: GestureScript) {
        if self.wearer.is_some() {
            let _ = self.link.send(LinkCtl::Play(script));
        }
    }

    fn session_active(&self) -> bool {
        self.pipeline.session().is_some_and(|s| !s.is_completed())
    }

    pub fn state(&self) -> Value {
        let session = self.pipeline.session().map(|s| s.snapshot());
        let phase = session.as_ref().map_or("idle", |s| s.phase.as_str());
        let counts: serde_json::Map<String, Value> = self
            .pipeline
            .calibration()
            .labels()
            .map(|l| (l.to_string(), json!(self.pipeline.calibration().count(l))))
            .collect();
        json!({
            "phase": phase,
            "session_id": self.session_id,
            "session": session,
            "device": {
                "connected": self.connected,
                "link": self.pipeline.stats(),
                "imu": self.pipeline.last_imu(),
            },
            "last_classification": self.pipeline.last_classification(),
            "calibration": {
                "recording": self.pipeline.recording(),
                "windows": counts,
            },
            "templates": self.pipeline.database().templates.keys().collect::<Vec<_>>(),
            "last_seq": self.hub.last_seq(),
            "t_us": self.now(),
        })
    }

    pub fn start_session(&mut self, body: &str) -> Result<Value, ApiError> {
        let (plan, params) = if body.trim().is_empty() {
            (self.plan.clone(), self.params)
        } else {
            PlanFile::parse(body).map_err(|e| ApiError::bad_request("bad_plan", e))?
        };
        if self.pipeline.recording().is_some() {
            return Err(ApiError::conflict("calibrating", "finish the calibration recording first"));
        }
        self.pipeline.start_session(plan.clone(), params).map_err(|e| match e {
            PipelineError::SessionActive => ApiError::conflict("session_active", e),
            PipelineError::Store(StoreError::NotSessionReady(_)) => ApiError::conflict("db_not_ready", e),
            PipelineError::Session(_) => ApiError::bad_request("bad_plan", e),
            other => ApiError::internal(other),
        })?;
        let id = uuid::Uuid::new_v4().to_string();
        let started_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        self.log = Some(SessionLog::new(id.clone(), started_at, plan.clone()));
        self.session_id = Some(id.clone());
        self.last_progress_us = 0;
        self.save_log();
        self.status("session_started", json!({ "session_id": id, "plan": plan, "params": params }));
        if let Some(w) = &self.wearer {
            let script = w
                .session_script
                .clone()
                .unwrap_or_else(|| GestureScript::perfect_session(&plan, &params, &SessionScriptOptions::default()));
            self.cue(script);
        }
        Ok(json!({ "session_id": id, "phase": "awaiting_sync" }))
    }

    fn abort(&mut self) -> Result<Value, ApiError> {
        if !self.session_active() {
            return Err(ApiError::conflict("no_session", "no session is running"));
        }
        self.pipeline.abort_session().map_err(ApiError::internal)?;
        self.save_log();
        let id = self.session_id.take();
        self.log = None;
        self.status("session_aborted", json!({ "session_id": id }));
        self.cue(GestureScript::with_total(Vec::new(), 0).expect("empty script"));
        Ok(json!({ "session_id": id, "phase": "idle" }))
    }

    fn calibration_start(&mut self, label: &str) -> Result<Value, ApiError> {
        let label: GestureLabel = label.parse().map_err(|e| ApiError::bad_request("bad_label", e))?;
        if self.session_active() {
            return Err(ApiError::conflict("session_active", "cannot calibrate during a session"));
        }
        if let Some(current) = self.pipeline.recording() {
            return Err(ApiError::conflict("calibrating", format!("already recording {current}")));
        }
        self.pipeline.start_recording(label).map_err(|e| ApiError::bad_request("bad_label", e))?;
        self.status("calibration_started", json!({ "label": label }));
        if let Some(w) = &self.wearer {
            let entries = vec![ScriptEntry { label, start_ms: 0, duration_ms: w.calibration_ms }];
            if let Ok(script) = GestureScript::new(entries) {
                self.cue(script);
            }
        }
        Ok(json!({ "recording": label }))
    }

    fn calibration_stop(&mut self, label: &str) -> Result<Value, ApiError> {
        let label: GestureLabel = label.parse().map_err(|e| ApiError::bad_request("bad_label", e))?;
        if self.pipeline.recording() != Some(label) {
            return Err(ApiError::conflict("not_recording", format!("not recording {label}")));
        }
        let windows = self.pipeline.calibration().count(label);
        let db = self
            .pipeline
            .finish_recording(MIN_CALIBRATION_WINDOWS)
            .map_err(|e| match e {
                PipelineError::Store(StoreError::InsufficientCalibration { .. }) => {
                    ApiError::unprocessable("insufficient_calibration", e)
                }
                other => ApiError::internal(other),
            })
            .cloned();
        self.cue(GestureScript::with_total(Vec::new(), 0).expect("empty script"));
        let db = match db {
            Ok(db) => db,
            Err(e) => {
                self.status("calibration_failed", json!({ "label": label, "reason": e.message }));
                return Err(e);
            }
        };
        save_db(&db, &self.db_path).map_err(ApiError::internal)?;
        let templates: serde_json::Map<String, Value> =
            db.templates.iter().map(|(l, t)| (l.to_string(), json!(t.sample_count))).collect();
        self.status("calibration_finished", json!({ "label": label, "windows": windows, "templates": templates }));
        Ok(json!({ "label": label, "windows": windows, "templates": templates }))
    }

    pub fn on_link(&mut self, e: LinkEvent) {
        match e {
            LinkEvent::Connected => {
                self.connected = true;
                self.pipeline.reconnected();
                self.status("device_connected", Value::Null);
            }
            LinkEvent::Disconnected(reason) => {
                self.connected = false;
                self.pipeline.reconnected();
                self.status("device_disconnected", json!({ "reason": reason }));
            }
            LinkEvent::Bytes(b) => self.on_bytes(&b),
        }
    }

    fn on_bytes(&mut self, bytes: &[u8]) {
        let out = match self.pipeline.feed(bytes) {
            Ok(out) => out,
            Err(e) => {
                tracing::warn!("pipeline: {e}");
                return;
            }
        };
        if !out.commands.is_empty() {
            let _ = self.link.send(LinkCtl::Send(encode_commands(&out.commands)));
        }
        // persist before broadcasting so a client never sees an event the
        // log on disk does not have yet
        if !out.events.is_empty() {
            if let Some(log) = self.log.as_mut() {
                for e in &out.events {
                    if let Err(err) = log.append(e.event, e.t_us) {
                        tracing::error!("session log: {err}");
                    }
                }
            }
            self.save_log();
        }
        for e in &out.events {
            self.hub.publish_feedback(e);
        }
        let Some(session) = self.pipeline.session() else { return };
        let snap = session.snapshot();
        let now = self.now();
        let progress_due = snap.phase == "holding" && now >= self.last_progress_us + PROGRESS_INTERVAL_US;
        if !out.events.is_empty() || progress_due {
            self.last_progress_us = now;
            self.hub.publish(now, "snapshot", json!(snap), None);
        }
        if out.events.iter().any(|e| e.event == FeedbackEvent::SessionCompleted) {
            self.cue(GestureScript::with_total(Vec::new(), 0).expect("empty script"));
        }
    }

    fn save_log(&self) {
        let Some(log) = &self.log else { return };
        let path = session_log_path(&self.sessions_dir, &log.session_id);
        if let Err(e) = save_log(log, &path) {
            tracing::error!("saving {}: {e}", path.display());
        }
    }
}
