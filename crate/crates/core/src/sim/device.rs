use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clock::Clock;
use super::model::{blend, EmgSynthModel, GainProfile};
use super::script::{GestureScript, ScriptEntry, RAMP_MS};
use super::transport::Transport;
use super::SimError;
use crate::emg::GestureLabel;
use crate::protocol::{Command, DeviceMessage, EmgDataPacket, FrameReader, ImuDataPacket};

/// One EMG notification (two samples) every 10 ms gives 200 Hz.
pub const EMG_PACKET_INTERVAL_MS: u64 = 10;
pub const IMU_PACKET_INTERVAL_MS: u64 = 20;
/// Continuous wave-out the armband itself treats as its sync gesture.
pub const DEVICE_SYNC_MS: u64 = 1000;

pub const MODE_OFF: Command = Command::SetMode { emg_mode: 0, imu_mode: 0, classifier_mode: 0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vibration {
    pub t_ms: u64,
    pub kind: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStatus {
    pub connected: bool,
    pub synced: bool,
    pub vibrations: Vec<Vibration>,
    pub mode: Command,
    pub emg_packets: u64,
    pub imu_packets: u64,
    /// Inbound bytes that did not decode as a command.
    pub rejected_messages: u64,
}

impl Default for SimStatus {
    fn default() -> Self {
        Self {
            connected: true,
            synced: false,
            vibrations: Vec::new(),
            mode: MODE_OFF,
            emg_packets: 0,
            imu_packets: 0,
            rejected_messages: 0,
        }
    }
}

/// Synthetic armband driven in 10 ms steps.
#[derive(Debug, Clone)]
pub struct Simulator {
    script: GestureScript,
    model: EmgSynthModel,
    rng: ChaCha8Rng,
    reader: FrameReader,
    status: SimStatus,
    t_ms: u64,
    wave_out_ms: u64,
    asleep: bool,
}

impl Simulator {
    pub fn new(script: GestureScript, model: EmgSynthModel) -> Result<Self, SimError> {
        model.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(Self {
            script,
            model,
            rng,
            reader: FrameReader::new(),
            status: SimStatus::default(),
            t_ms: 0,
            wave_out_ms: 0,
            asleep: false,
        })
    }

    /// Starts in `mode` instead of with every stream off.
    pub fn with_mode(mut self, mode: Command) -> Result<Self, SimError> {
        mode.validate().map_err(|e| SimError::BadModel(e.to_string()))?;
        match mode {
            Command::SetMode { .. } => self.status.mode = mode,
            _ => return Err(SimError::BadModel("initial mode must be a set-mode command".into())),
        }
        Ok(self)
    }

    pub fn now_ms(&self) -> u64 {
        self.t_ms
    }

    pub fn status(&self) -> &SimStatus {
        &self.status
    }

    pub fn script(&self) -> &GestureScript {
        &self.script
    }

    pub fn is_finished(&self) -> bool {
        self.asleep || self.t_ms >= self.script.total_ms()
    }

    /// Replaces the rest of the timeline with `script`, starting now. The
    /// run keeps going at least until the new script ends.
    pub fn play(&mut self, script: &GestureScript) {
        let now = self.t_ms;
        let entries = script.entries().iter().map(|e| ScriptEntry { start_ms: e.start_ms + now, ..*e }).collect();
        let total = self.script.total_ms().max(now.saturating_add(script.total_ms()));
        self.script = GestureScript::with_total(entries, total).expect("shifting keeps entries ordered");
    }

    pub fn into_status(self) -> SimStatus {
        self.status
    }

    fn gains_at(&self, t_ms: u64) -> GainProfile {
        let (cur, prev, since) = self.script.transition_at(t_ms);
        let to = self.model.gains_for(cur);
        if since >= RAMP_MS {
            to
        } else {
            blend(&self.model.gains_for(prev), &to, since as f64 / RAMP_MS as f64)
        }
    }

    fn closed(&mut self) -> SimError {
        self.status.connected = false;
        SimError::TransportClosed(Box::new(self.status.clone()))
    }

    /// Applies every command that has arrived so far.
    pub fn drain_commands<T: Transport + ?Sized>(&mut self, transport: &mut T) -> Result<(), SimError> {
        loop {
            let bytes = match transport.try_recv() {
                Ok(Some(b)) => b,
                Ok(None) => return Ok(()),
                Err(_) => return Err(self.closed()),
            };
            self.reader.push(&bytes);
            loop {
                let frame = match self.reader.next_message() {
                    Ok(Some(f)) => f,
                    Ok(None) => break,
                    Err(_) => {
                        // unrecoverable framing; drop what is buffered
                        self.status.rejected_messages += 1;
                        self.reader.clear();
                        break;
                    }
                };
                match DeviceMessage::from_frame(&frame) {
                    Ok(DeviceMessage::Command(cmd)) => self.apply(cmd),
                    _ => self.status.rejected_messages += 1,
                }
            }
        }
    }

    fn apply(&mut self, cmd: Command) {
        match cmd {
            Command::SetMode { .. } => self.status.mode = cmd,
            Command::Vibrate { kind } => self.status.vibrations.push(Vibration { t_ms: self.t_ms, kind }),
            Command::DeepSleep => {
                self.status.mode = MODE_OFF;
                self.asleep = true;
            }
        }
    }

    /// Processes commands, emits this step's packets and advances 10 ms.
    /// Returns false once the script is over or the device went to sleep.
    pub fn step<T: Transport + ?Sized>(&mut self, transport: &mut T) -> Result<bool, SimError> {
        if self.is_finished() {
            return Ok(false);
        }
        self.drain_commands(transport)?;
        if self.asleep {
            return Ok(false);
        }
        let t = self.t_ms;
        let Command::SetMode { emg_mode, imu_mode, .. } = self.status.mode else {
            unreachable!("mode is always a set-mode command")
        };

        if emg_mode != 0 {
            let half = EMG_PACKET_INTERVAL_MS / 2;
            let a = self.model.synth_frame(&self.gains_at(t), &mut self.rng);
            let b = self.model.synth_frame(&self.gains_at(t + half), &mut self.rng);
            let msg = DeviceMessage::Emg(EmgDataPacket { samples: [a, b] });
            self.send(transport, &msg)?;
            self.status.emg_packets += 1;
        }
        if imu_mode != 0 && t.is_multiple_of(IMU_PACKET_INTERVAL_MS) {
            self.send(transport, &DeviceMessage::Imu(ImuDataPacket::RESTING))?;
            self.status.imu_packets += 1;
        }

        if self.script.label_at(t) == GestureLabel::WaveOut {
            self.wave_out_ms += EMG_PACKET_INTERVAL_MS;
            if self.wave_out_ms >= DEVICE_SYNC_MS {
                self.status.synced = true;
            }
        } else {
            self.wave_out_ms = 0;
        }

        self.t_ms += EMG_PACKET_INTERVAL_MS;
        Ok(!self.is_finished())
    }

    fn send<T: Transport + ?Sized>(&mut self, transport: &mut T, msg: &DeviceMessage) -> Result<(), SimError> {
        let bytes = msg.to_frame().expect("simulator messages are always encodable");
        transport.send(&bytes).map_err(|_| self.closed())
    }
}

/// Plays `script` to completion over `transport`, paced by `clock`.
pub fn run_script<T, C>(
    script: GestureScript,
    model: EmgSynthModel,
    transport: &mut T,
    clock: &mut C,
) -> Result<SimStatus, SimError>
where
    T: Transport + ?Sized,
    C: Clock + ?Sized,
{
    run_simulator(Simulator::new(script, model)?, transport, clock)
}

pub fn run_simulator<T, C>(mut sim: Simulator, transport: &mut T, clock: &mut C) -> Result<SimStatus, SimError>
where
    T: Transport + ?Sized,
    C: Clock + ?Sized,
{
    loop {
        clock.wait_until(sim.now_ms());
        if !sim.step(transport)? {
            break;
        }
    }
    // commands answering the final packets
    sim.drain_commands(transport)?;
    Ok(sim.into_status())
}
