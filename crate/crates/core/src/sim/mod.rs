//! Deterministic synthetic armband for tests and demos.

mod clock;
mod device;
mod model;
mod script;
mod transport;

pub use clock::{Clock, ScaledClock, VirtualClock};
pub use device::{
    run_script, run_simulator, SimStatus, Simulator, Vibration, DEVICE_SYNC_MS, EMG_PACKET_INTERVAL_MS,
    IMU_PACKET_INTERVAL_MS, MODE_OFF,
};
pub use model::{blend, synth_sample, EmgSynthModel, GainProfile};
pub use script::{GestureScript, ScriptEntry, SessionScriptOptions, WrongGesture, RAMP_MS};
pub use transport::{pipe, PipeEnd, TcpTransport, Transport, TransportClosed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("bad gesture script: {0}")]
    BadScript(String),
    #[error("bad synthesis model: {0}")]
    BadModel(String),
    #[error("transport closed after {} EMG packets", .0.emg_packets)]
    TransportClosed(Box<SimStatus>),
}
