//! Device connection: owns the transport and its read side, forwards raw
//! bytes to the engine and writes the engine's commands back.

use std::collections::VecDeque;
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::thread::JoinHandle;
use std::time::Duration;

use rehab_core::pipeline::encode_commands;
use rehab_core::protocol::Command;
use rehab_core::sim::{
    Clock, EmgSynthModel, GestureScript, ScaledClock, Simulator, TcpTransport, Transport, TransportClosed,
};

const MIN_BACKOFF: Duration = Duration::from_millis(100);
const MAX_BACKOFF: Duration = Duration::from_secs(2);
const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkEvent {
    Connected,
    Bytes(Vec<u8>),
    Disconnected(String),
}

#[derive(Debug, Clone)]
pub enum LinkCtl {
    Send(Vec<u8>),
    /// Simulated armband only: the wearer starts performing this script.
    Play(GestureScript),
    /// Cuts the connection. The simulated armband comes back after
    /// `outage_ms` of its own time; a TCP link reconnects with backoff.
    Drop {
        outage_ms: u64,
    },
    Stop,
}

/// Called for every link event; returns false once nobody is listening.
pub type Emit = Box<dyn FnMut(LinkEvent) -> bool + Send>;

pub struct Link {
    ctl: Sender<LinkCtl>,
    thread: Option<JoinHandle<()>>,
}

impl Link {
    pub fn simulated(model: EmgSynthModel, clock_factor: f64, emit: Emit) -> Self {
        Self::spawn("sim-link", move |rx| run_sim(model, clock_factor, rx, emit))
    }

    pub fn tcp(addr: String, emit: Emit) -> Self {
        Self::spawn("tcp-link", move |rx| run_tcp(&addr, rx, emit))
    }

    fn spawn(name: &str, body: impl FnOnce(Receiver<LinkCtl>) + Send + 'static) -> Self {
        let (ctl, rx) = mpsc::channel();
        let thread = std::thread::Builder::new().name(name.into()).spawn(move || body(rx)).expect("spawn link thread");
        Self { ctl, thread: Some(thread) }
    }

    pub fn control(&self) -> Sender<LinkCtl> {
        self.ctl.clone()
    }

    pub fn stop(&mut self) {
        let _ = self.ctl.send(LinkCtl::Stop);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Link {
    fn drop(&mut self) {
        self.stop();
    }
}

fn hello() -> Vec<u8> {
    encode_commands(&[Command::STREAM_ALL])
}

/// The simulator's side of an in-process connection to the engine.
struct Bridge {
    emit: Emit,
    inbox: VecDeque<Vec<u8>>,
    up: bool,
}

impl Transport for Bridge {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportClosed> {
        if self.up && !(self.emit)(LinkEvent::Bytes(bytes.to_vec())) {
            return Err(TransportClosed);
        }
        Ok(())
    }

    fn try_recv(&mut self) -> Result<Option<Vec<u8>>, TransportClosed> {
        Ok(self.inbox.pop_front())
    }
}

fn run_sim(model: EmgSynthModel, clock_factor: f64, rx: Receiver<LinkCtl>, emit: Emit) {
    let idle = GestureScript::with_total(Vec::new(), u64::MAX).expect("empty script");
    let mut sim = match Simulator::new(idle, model) {
        Ok(s) => s,
        Err(e) => {
            tracing::error!("simulator: {e}");
            return;
        }
    };
    let mut clock = ScaledClock::new(clock_factor);
    let mut bridge = Bridge { emit, inbox: VecDeque::from([hello()]), up: true };
    if !(bridge.emit)(LinkEvent::Connected) {
        return;
    }
    let mut reconnect_at: Option<u64> = None;
    loop {
        loop {
            match rx.try_recv() {
                Ok(LinkCtl::Send(b)) if bridge.up => bridge.inbox.push_back(b),
                Ok(LinkCtl::Send(_)) => {}
                Ok(LinkCtl::Play(script)) => sim.play(&script),
                Ok(LinkCtl::Drop { outage_ms }) => {
                    if bridge.up {
                        bridge.up = false;
                        bridge.inbox.clear();
                        reconnect_at = Some(sim.now_ms() + outage_ms);
                        if !(bridge.emit)(LinkEvent::Disconnected("link dropped".into())) {
                            return;
                        }
                    }
                }
                Ok(LinkCtl::Stop) | Err(TryRecvError::Disconnected) => return,
                Err(TryRecvError::Empty) => break,
            }
        }
        if reconnect_at.is_some_and(|at| sim.now_ms() >= at) {
            reconnect_at = None;
            bridge.up = true;
            bridge.inbox.push_back(hello());
            if !(bridge.emit)(LinkEvent::Connected) {
                return;
            }
        }
        clock.wait_until(sim.now_ms());
        if sim.step(&mut bridge).is_err() {
            return;
        }
    }
}

fn run_tcp(addr: &str, rx: Receiver<LinkCtl>, mut emit: Emit) {
    let mut backoff = MIN_BACKOFF;
    loop {
        let mut t = match TcpTransport::connect(addr) {
            Ok(t) => t,
            Err(e) => {
                tracing::debug!("connect {addr}: {e}; retrying in {backoff:?}");
                if wait_or_stop(&rx, backoff) {
                    return;
                }
                backoff = (backoff * 2).min(MAX_BACKOFF);
                continue;
            }
        };
        backoff = MIN_BACKOFF;
        if !emit(LinkEvent::Connected) {
            return;
        }
        let reason = match pump(&mut t, &rx, &mut emit) {
            Pump::Stop => return,
            Pump::Lost(reason) => reason,
        };
        drop(t);
        if !emit(LinkEvent::Disconnected(reason)) {
            return;
        }
    }
}

enum Pump {
    Stop,
    Lost(String),
}

fn pump(t: &mut TcpTransport, rx: &Receiver<LinkCtl>, emit: &mut Emit) -> Pump {
    if t.send(&hello()).is_err() {
        return Pump::Lost("write failed".into());
    }
    loop {
        match t.recv_timeout(POLL) {
            Ok(Some(b)) => {
                if !emit(LinkEvent::Bytes(b)) {
                    return Pump::Stop;
                }
            }
            Ok(None) => {}
            Err(_) => return Pump::Lost("peer closed the connection".into()),
        }
        loop {
            match rx.try_recv() {
                Ok(LinkCtl::Send(b)) => {
                    if t.send(&b).is_err() {
                        return Pump::Lost("write failed".into());
                    }
                }
                Ok(LinkCtl::Play(_)) => {}
                Ok(LinkCtl::Drop { .. }) => return Pump::Lost("link dropped".into()),
                Ok(LinkCtl::Stop) | Err(TryRecvError::Disconnected) => return Pump::Stop,
                Err(TryRecvError::Empty) => break,
            }
        }
    }
}

/// Sleeps for `d` unless told to stop first. Returns true on stop.
fn wait_or_stop(rx: &Receiver<LinkCtl>, d: Duration) -> bool {
    match rx.recv_timeout(d) {
        Ok(LinkCtl::Stop) | Err(mpsc::RecvTimeoutError::Disconnected) => true,
        Ok(_) | Err(mpsc::RecvTimeoutError::Timeout) => false,
    }
}
