use std::fmt;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;

use rehab_core::emg::DEFAULT_REJECT_THRESHOLD;

/// Where the armband stream comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportConfig {
    /// In-process simulated armband.
    Sim,
    /// Framed stream from a TCP peer, e.g. `rehab simulate --listen`.
    Tcp(String),
}

impl FromStr for TransportConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sim" => Ok(Self::Sim),
            _ => match s.strip_prefix("tcp:") {
                Some(addr) if !addr.is_empty() => Ok(Self::Tcp(addr.to_string())),
                _ => Err(format!("expected `sim` or `tcp:<host:port>`, got `{s}`")),
            },
        }
    }
}

impl fmt::Display for TransportConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sim => f.write_str("sim"),
            Self::Tcp(a) => write!(f, "tcp:{a}"),
        }
    }
}

/// Pacing of the simulated armband: wall-clock or `x<factor>` faster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClockConfig {
    Real,
    Accelerated(f64),
}

impl ClockConfig {
    pub fn factor(self) -> f64 {
        match self {
            Self::Real => 1.0,
            Self::Accelerated(f) => f,
        }
    }
}

impl FromStr for ClockConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "real" {
            return Ok(Self::Real);
        }
        let factor = s
            .strip_prefix('x')
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| format!("expected `real` or `x<factor>`, got `{s}`"))?;
        if !(factor.is_finite() && factor > 0.0) {
            return Err(format!("clock factor must be positive, got {factor}"));
        }
        Ok(Self::Accelerated(factor))
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub transport: TransportConfig,
    pub db_path: PathBuf,
    /// Plan used when a start request has no body. Defaults to the built-in plan.
    pub plan_path: Option<PathBuf>,
    pub listen: SocketAddr,
    pub seed: u64,
    pub clock: ClockConfig,
    pub sessions_dir: PathBuf,
    pub reject_threshold: f64,
    /// Gesture script the simulated wearer performs when a session starts.
    /// Defaults to a flawless run of the plan.
    pub sim_script: Option<PathBuf>,
    /// How long the simulated wearer holds a gesture being calibrated.
    pub sim_calibration_ms: u64,
    /// Start a session with the default plan as soon as the service is up.
    pub autostart: bool,
}

impl ServiceConfig {
    pub fn new(db_path: impl Into<PathBuf>) -> Self {
        Self {
            transport: TransportConfig::Sim,
            db_path: db_path.into(),
            plan_path: None,
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            seed: 0,
            clock: ClockConfig::Real,
            sessions_dir: PathBuf::from("sessions"),
            reject_threshold: DEFAULT_REJECT_THRESHOLD,
            sim_script: None,
            sim_calibration_ms: 6000,
            autostart: false,
        }
    }
}
