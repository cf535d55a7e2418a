use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use rehab_core::emg::{FeatureConfig, GestureLabel, DEFAULT_REJECT_THRESHOLD};
use rehab_core::pipeline::{run_loopback, HostPipeline};
use rehab_core::sim::{
    run_script, EmgSynthModel, GestureScript, ScaledClock, ScriptEntry, SimError, TcpTransport, Transport,
};
use rehab_core::store::{load_db, save_db, TemplateDatabase, MIN_CALIBRATION_WINDOWS};
use rehab_service::{ClockConfig, ServiceConfig, TransportConfig};

#[derive(Parser)]
#[command(name = "rehab", version, about = "EMG-guided hand exercise sessions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the session service with its HTTP API and event stream.
    Serve {
        #[arg(long, default_value = "sim")]
        transport: TransportConfig,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "real")]
        clock: ClockConfig,
        #[arg(long, default_value = "sessions")]
        sessions_dir: PathBuf,
        /// Script the simulated wearer performs when a session starts.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_REJECT_THRESHOLD)]
        reject_threshold: f64,
        /// Start a session with the configured plan right away.
        #[arg(long)]
        autostart: bool,
    },
    /// Record gestures from the armband and add them to a template database.
    Calibrate {
        /// Gestures to record, or `all`.
        #[arg(long, required = true, num_args = 1..)]
        label: Vec<String>,
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value = "sim")]
        transport: TransportConfig,
        /// Recording length per gesture.
        #[arg(long, default_value_t = 6000)]
        duration_ms: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = MIN_CALIBRATION_WINDOWS)]
        min_windows: usize,
    },
    /// Serve a simulated armband over TCP.
    Simulate {
        /// JSON list of {label, start_ms, duration_ms}.
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        listen: SocketAddr,
        #[arg(long, default_value = "real")]
        clock: ClockConfig,
        /// Exit after the first connection instead of waiting for another.
        #[arg(long)]
        once: bool,
    },
}

fn main() -> ExitCode {
    let level =
        std::env::var("RUST_LOG").ok().and_then(|v| v.parse::<tracing::Level>().ok()).unwrap_or(tracing::Level::INFO);
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    let result = match Cli::parse().command {
        Cmd::Serve { transport, db, plan, listen, seed, clock, sessions_dir, script, reject_threshold, autostart } => {
            let config = ServiceConfig {
                transport,
                db_path: db,
                plan_path: plan,
                listen,
                seed,
                clock,
                sessions_dir,
                reject_threshold,
                sim_script: script,
                autostart,
                ..ServiceConfig::new("")
            };
            serve(config)
        }
        Cmd::Calibrate { label, db, transport, duration_ms, seed, min_windows } => {
            calibrate(&label, &db, &transport, duration_ms, seed, min_windows)
        }
        Cmd::Simulate { script, seed, listen, clock, once } => simulate(&script, seed, listen, clock, once),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn serve(config: ServiceConfig) -> Result<(), String> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(rehab_service::run_service(config)).map_err(|e| e.to_string())
}

fn parse_labels(raw: &[String]) -> Result<Vec<GestureLabel>, String> {
    if raw.iter().any(|l| l == "all") {
        return Ok(GestureLabel::TEMPLATE_LABELS.to_vec());
    }
    raw.iter().map(|l| l.parse::<GestureLabel>().map_err(|e| e.to_string())).collect()
}

fn calibrate(
    raw_labels: &[String],
    db_path: &Path,
    transport: &TransportConfig,
    duration_ms: u64,
    seed: u64,
    min_windows: usize,
) -> Result<(), String> {
    let labels = parse_labels(raw_labels)?;
    let db = if db_path.exists() {
        load_db(db_path).map_err(|e| e.to_string())?
    } else {
        TemplateDatabase::new(FeatureConfig::default())
    };
    let mut pipeline = HostPipeline::new(db, DEFAULT_REJECT_THRESHOLD).map_err(|e| e.to_string())?;
    match transport {
        TransportConfig::Sim => {
            for (i, label) in labels.iter().enumerate() {
                let script = GestureScript::new(vec![ScriptEntry { label: *label, start_ms: 0, duration_ms }])
                    .map_err(|e| e.to_string())?;
                pipeline.start_recording(*label).map_err(|e| e.to_string())?;
                let model = EmgSynthModel::with_seed(seed.wrapping_add(i as u64));
                pipeline = run_loopback(script, model, pipeline).map_err(|e| e.to_string())?.host.pipeline;
                finish(&mut pipeline, *label, min_windows)?;
            }
        }
        TransportConfig::Tcp(addr) => {
            let mut link = TcpTransport::connect(addr).map_err(|e| format!("{addr}: {e}"))?;
            link.send(&pipeline.connect_bytes()).map_err(|e| e.to_string())?;
            for label in &labels {
                eprintln!("hold {label} for {} s", duration_ms as f64 / 1000.0);
                pipeline.start_recording(*label).map_err(|e| e.to_string())?;
                let until = pipeline.now_us() + duration_ms * 1000;
                while pipeline.now_us() < until {
                    match link.recv_timeout(Duration::from_secs(5)) {
                        Ok(Some(b)) => {
                            pipeline.feed(&b).map_err(|e| e.to_string())?;
                        }
                        Ok(None) => return Err("no data from the armband for 5 s".into()),
                        Err(e) => return Err(e.to_string()),
                    }
                }
                finish(&mut pipeline, *label, min_windows)?;
            }
        }
    }
    save_db(pipeline.database(), db_path).map_err(|e| e.to_string())?;
    eprintln!("saved {}", db_path.display());
    Ok(())
}

fn finish(pipeline: &mut HostPipeline, label: GestureLabel, min_windows: usize) -> Result<(), String> {
    let n = pipeline.calibration().count(label);
    pipeline.finish_recording(min_windows).map_err(|e| e.to_string())?;
    eprintln!("{label}: {n} windows");
    Ok(())
}

fn simulate(script: &Path, seed: u64, listen: SocketAddr, clock: ClockConfig, once: bool) -> Result<(), String> {
    let script = GestureScript::load(script).map_err(|e| e.to_string())?;
    let model = EmgSynthModel::with_seed(seed);
    model.validate().map_err(|e| e.to_string())?;
    let listener = TcpListener::bind(listen).map_err(|e| format!("{listen}: {e}"))?;
    eprintln!("simulated armband on {}", listener.local_addr().map_err(|e| e.to_string())?);
    loop {
        let (stream, peer) = listener.accept().map_err(|e| e.to_string())?;
        eprintln!("connection from {peer}");
        let mut transport = TcpTransport::new(stream).map_err(|e| e.to_string())?;
        let mut clk = ScaledClock::new(clock.factor());
        let status = match run_script(script.clone(), model.clone(), &mut transport, &mut clk) {
            Ok(status) => status,
            Err(SimError::TransportClosed(partial)) => *partial,
            Err(e) => return Err(e.to_string()),
        };
        println!("{}", serde_json::to_string(&status).expect("status serializes"));
        if once {
            return Ok(());
        }
    }
}
