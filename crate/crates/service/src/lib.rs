//! Long-running service around the host pipeline: device link, engine loop,
//! and an HTTP API with a server-sent event stream for the patient UI.

pub mod config;
pub mod engine;
pub mod error;
pub mod http;
pub mod hub;
pub mod link;

use std::net::SocketAddr;
use std::sync::mpsc::Sender;
use std::sync::Arc;

use rehab_core::pipeline::HostPipeline;
use rehab_core::session::{ExercisePlan, PlanFile, SessionParams};
use rehab_core::sim::{EmgSynthModel, GestureScript};
use rehab_core::store::load_db;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use config::{ClockConfig, ServiceConfig, TransportConfig};
pub use engine::{EngineHandle, Request};
pub use error::{ApiError, StartupError};
pub use hub::{EventHub, WireEvent};
use link::{Link, LinkCtl};

pub struct RunningService {
    pub addr: SocketAddr,
    pub hub: Arc<EventHub>,
    pub engine: EngineHandle,
    link_ctl: Sender<LinkCtl>,
    link: Link,
    stop_server: Option<oneshot::Sender<()>>,
    server: JoinHandle<()>,
    engine_task: JoinHandle<()>,
}

impl RunningService {
    /// Cuts the device connection, as if the armband went out of range.
    pub fn drop_link(&self, outage_ms: u64) {
        let _ = self.link_ctl.send(LinkCtl::Drop { outage_ms });
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.stop_server.take() {
            let _ = tx.send(());
        }
        self.hub.close();
        let _ = self.server.await;
        self.engine.shutdown();
        let _ = self.engine_task.await;
        let mut link = self.link;
        let _ = tokio::task::spawn_blocking(move || link.stop()).await;
    }
}

fn load_inputs(
    config: &ServiceConfig,
) -> Result<(HostPipeline, ExercisePlan, SessionParams, Option<GestureScript>), StartupError> {
    let db = load_db(&config.db_path)
        .map_err(|e| StartupError::Database { path: config.db_path.display().to_string(), reason: e.to_string() })?;
    let (plan, params) = match &config.plan_path {
        Some(p) => PlanFile::load(p)
            .map_err(|e| StartupError::Plan { path: p.display().to_string(), reason: e.to_string() })?,
        None => (ExercisePlan::default(), SessionParams::default()),
    };
    let script = match &config.sim_script {
        Some(p) => Some(
            GestureScript::load(p)
                .map_err(|e| StartupError::Script { path: p.display().to_string(), reason: e.to_string() })?,
        ),
        None => None,
    };
    let pipeline = HostPipeline::new(db, config.reject_threshold).map_err(|e| StartupError::Pipeline(e.to_string()))?;
    Ok((pipeline, plan, params, script))
}

/// Loads inputs, binds the listener and starts the link, engine and HTTP
/// server. Fails before anything is spawned if an input cannot be loaded.
pub async fn start(config: ServiceConfig) -> Result<RunningService, StartupError> {
    let (pipeline, plan, params, script) = load_inputs(&config)?;
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|e| StartupError::Listen { addr: config.listen.to_string(), reason: e.to_string() })?;
    let addr = listener
        .local_addr()
        .map_err(|e| StartupError::Listen { addr: config.listen.to_string(), reason: e.to_string() })?;

    let hub = Arc::new(EventHub::new());
    let (handle, rx) = engine::channel();
    let emit_handle = handle.clone();
    let emit: link::Emit = Box::new(move |e| emit_handle.link_event(e));
    let (link, wearer) = match &config.transport {
        TransportConfig::Sim => {
            let model = EmgSynthModel::with_seed(config.seed);
            let cues = engine::WearerCues { session_script: script, calibration_ms: config.sim_calibration_ms };
            (Link::simulated(model, config.clock.factor(), emit), Some(cues))
        }
        TransportConfig::Tcp(a) => (Link::tcp(a.clone(), emit), None),
    };
    let link_ctl = link.control();

    let mut eng = engine::Engine::new(
        pipeline,
        hub.clone(),
        link_ctl.clone(),
        plan,
        params,
        config.db_path.clone(),
        config.sessions_dir.clone(),
        wearer,
    );
    if config.autostart {
        if let Err(e) = eng.start_session("") {
            tracing::warn!("autostart: {e}");
        }
    }
    let engine_task = tokio::spawn(eng.run(rx));

    let app = http::router(handle.clone(), hub.clone());
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let shutdown = async {
            let _ = stop_rx.await;
        };
        if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
            tracing::error!("http server: {e}");
        }
    });
    tracing::info!("listening on http://{addr} ({})", config.transport);

    Ok(RunningService { addr, hub, engine: handle, link_ctl, link, stop_server: Some(stop_tx), server, engine_task })
}

/// Runs until Ctrl-C.
pub async fn run_service(config: ServiceConfig) -> Result<(), StartupError> {
    let service = start(config).await?;
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down");
    service.shutdown().await;
    Ok(())
}
