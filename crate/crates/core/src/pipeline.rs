//! Host side of the armband link: bytes in, feedback events and device
//! commands out.

use std::collections::{BTreeMap, VecDeque};

use crate::emg::{
    classify, featurize, slide_windows, Classification, EmgError, EmgFrame, EmgWindow, FeatureConfig, GestureLabel,
    Windower,
};
use crate::protocol::{Command, DeviceMessage, FrameReader, ImuReading};
use crate::session::{ExercisePlan, FeedbackEvent, Session, SessionError, SessionParams, TimedEvent};
use crate::sim::{
    run_simulator, EmgSynthModel, GestureScript, SimError, SimStatus, Simulator, Transport, TransportClosed,
    VirtualClock, RAMP_MS,
};
use crate::store::{CalibrationSet, StoreError, TemplateDatabase};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Emg(#[from] EmgError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no session running")]
    NoSession,
    #[error("a session is already running")]
    SessionActive,
    #[error("no calibration recording in progress")]
    NotRecording,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct PipelineOutput {
    pub events: Vec<TimedEvent>,
    pub commands: Vec<Command>,
    pub classifications: Vec<Classification>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct LinkStats {
    pub emg_packets: u64,
    pub imu_packets: u64,
    pub classifier_events: u64,
    /// Frames or packets that failed to decode and were skipped.
    pub dropped: u64,
    pub windows: u64,
}

/// Decodes the device stream, stamps samples from a sample counter,
/// windows, featurizes, classifies, and drives the session engine.
#[derive(Debug)]
pub struct HostPipeline {
    db: TemplateDatabase,
    reject_threshold: f64,
    reader: FrameReader,
    windower: Windower,
    period_us: u64,
    next_sample_us: u64,
    session: Option<Session>,
    calibration: CalibrationSet,
    recording: Option<GestureLabel>,
    last_classification: Option<Classification>,
    last_imu: Option<ImuReading>,
    stats: LinkStats,
}

impl HostPipeline {
    /// The database may be empty, e.g. before the first calibration; windows
    /// are then only recorded, never classified.
    pub fn new(db: TemplateDatabase, reject_threshold: f64) -> Result<Self, PipelineError> {
        db.validate()?;
        if reject_threshold.is_nan() || reject_threshold <= 0.0 {
            return Err(
                EmgError::BadConfig(format!("reject threshold must be positive, got {reject_threshold}")).into()
            );
        }
        let spec = db.feature_config.window_spec();
        Ok(Self {
            windower: Windower::new(spec)?,
            period_us: spec.sample_period_us(),
            calibration: CalibrationSet::new(db.feature_config.clone())?,
            db,
            reject_threshold,
            reader: FrameReader::new(),
            next_sample_us: 0,
            session: None,
            recording: None,
            last_classification: None,
            last_imu: None,
            stats: LinkStats::default(),
        })
    }

    pub fn database(&self) -> &TemplateDatabase {
        &self.db
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.db.feature_config
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn last_classification(&self) -> Option<&Classification> {
        self.last_classification.as_ref()
    }

    pub fn last_imu(&self) -> Option<&ImuReading> {
        self.last_imu.as_ref()
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    /// Engine time: the timestamp the next sample will get.
    pub fn now_us(&self) -> u64 {
        self.next_sample_us
    }

    /// Bytes to write when a device connects.
    pub fn connect_bytes(&self) -> Vec<u8> {
        encode_commands(&[Command::STREAM_ALL])
    }

    /// Drops partial frames and windows after a link loss. The sample clock
    /// and any session carry on from where they were.
    pub fn reconnected(&mut self) {
        self.reader.clear();
        self.windower.reset();
    }

    pub fn start_session(&mut self, plan: ExercisePlan, params: SessionParams) -> Result<(), PipelineError> {
        if self.session.as_ref().is_some_and(|s| !s.is_completed()) {
            return Err(PipelineError::SessionActive);
        }
        self.db.check_session_ready()?;
        self.session = Some(Session::new(plan, params)?);
        Ok(())
    }

    pub fn abort_session(&mut self) -> Result<Session, PipelineError> {
        self.session.take().ok_or(PipelineError::NoSession)
    }

    /// Starts a fresh recording for `label`, discarding earlier windows
    /// recorded for it.
    pub fn start_recording(&mut self, label: GestureLabel) -> Result<(), PipelineError> {
        if label == GestureLabel::Unknown {
            return Err(StoreError::BadLabel(label).into());
        }
        self.calibration.clear(label);
        self.recording = Some(label);
        Ok(())
    }

    pub fn recording(&self) -> Option<GestureLabel> {
        self.recording
    }

    pub fn calibration(&self) -> &CalibrationSet {
        &self.calibration
    }

    /// Stops recording and rebuilds the database from everything recorded
    /// so far, keeping existing templates for gestures not recalibrated.
    /// On failure the recorded windows are kept.
    pub fn finish_recording(&mut self, min_windows: usize) -> Result<&TemplateDatabase, PipelineError> {
        let Some(label) = self.recording.take() else {
            return Err(PipelineError::NotRecording);
        };
        let need = min_windows.max(1);
        let have = self.calibration.count(label);
        if have < need {
            return Err(StoreError::InsufficientCalibration { label, have, need }.into());
        }
        let fresh = self.calibration.finalize(min_windows)?;
        let mut db = self.db.clone();
        db.templates.extend(fresh.templates);
        db.validate()?;
        self.db = db;
        Ok(&self.db)
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Result<PipelineOutput, PipelineError> {
        let mut out = PipelineOutput::default();
        self.reader.push(bytes);
        loop {
            let frame = match self.reader.next_message() {
                Ok(Some(f)) => f,
                Ok(None) => break,
                Err(_) => {
                    // a bad length prefix cannot be resynchronized
                    self.stats.dropped += 1;
                    self.reader.clear();
                    break;
                }
            };
            match DeviceMessage::from_frame(&frame) {
                Ok(DeviceMessage::Emg(p)) => {
                    self.stats.emg_packets += 1;
                    let (a, b) = p.to_frames(self.next_sample_us, self.period_us);
                    self.next_sample_us += 2 * self.period_us;
                    self.on_frame(a, &mut out)?;
                    self.on_frame(b, &mut out)?;
                    if let Some(s) = self.session.as_mut() {
                        let events = s.tick(b.timestamp_us)?;
                        collect(events, &mut out);
                    }
                }
                Ok(DeviceMessage::Imu(p)) => {
                    self.stats.imu_packets += 1;
                    self.last_imu = Some(p.scaled());
                }
                Ok(DeviceMessage::ClassifierEvent(_)) => self.stats.classifier_events += 1,
                Ok(DeviceMessage::Command(_)) | Err(_) => self.stats.dropped += 1,
            }
        }
        Ok(out)
    }

    fn on_frame(&mut self, frame: EmgFrame, out: &mut PipelineOutput) -> Result<(), PipelineError> {
        let Some(window) = self.windower.push(frame)? else {
            return Ok(());
        };
        self.stats.windows += 1;
        if let Some(label) = self.recording {
            self.calibration.record(label, std::slice::from_ref(&window))?;
        }
        if self.db.templates.is_empty() {
            return Ok(());
        }
        let fv = featurize(&window, &self.db.feature_config)?;
        let c = classify(&fv, &self.db, self.reject_threshold, window.end_us())?;
        if let Some(s) = self.session.as_mut() {
            collect(s.on_classification(&c)?, out);
        }
        self.last_classification = Some(c);
        out.classifications.push(c);
        Ok(())
    }
}

fn collect(events: Vec<TimedEvent>, out: &mut PipelineOutput) {
    for e in &events {
        if let FeedbackEvent::VibrateRequested { kind } = e.event {
            out.commands.push(Command::Vibrate { kind });
        }
    }
    out.events.extend(events);
}

pub fn encode_commands(cmds: &[Command]) -> Vec<u8> {
    cmds.iter().flat_map(|c| DeviceMessage::Command(*c).to_frame().expect("host commands are valid")).collect()
}

/// A host pipeline posing as the simulator's transport: every packet the
/// simulator sends is processed before the simulator takes its next step,
/// so a whole session runs deterministically on one thread.
#[derive(Debug)]
pub struct LoopbackHost {
    pub pipeline: HostPipeline,
    pub events: Vec<TimedEvent>,
    pub classifications: Vec<Classification>,
    pub error: Option<PipelineError>,
    outbound: VecDeque<Vec<u8>>,
}

impl LoopbackHost {
    pub fn new(pipeline: HostPipeline) -> Self {
        let hello = pipeline.connect_bytes();
        Self {
            pipeline,
            events: Vec::new(),
            classifications: Vec::new(),
            error: None,
            outbound: VecDeque::from([hello]),
        }
    }
}

impl Transport for LoopbackHost {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportClosed> {
        match self.pipeline.feed(bytes) {
            Ok(out) => {
                if !out.commands.is_empty() {
                    self.outbound.push_back(encode_commands(&out.commands));
                }
                self.events.extend(out.events);
                self.classifications.extend(out.classifications);
                Ok(())
            }
            Err(e) => {
                self.error = Some(e);
                Err(TransportClosed)
            }
        }
    }

    fn try_recv(&mut self) -> Result<Option<Vec<u8>>, TransportClosed> {
        Ok(self.outbound.pop_front())
    }
}

/// Result of playing a script against a host pipeline in lockstep.
#[derive(Debug)]
pub struct LoopbackRun {
    pub host: LoopbackHost,
    pub device: SimStatus,
}

/// Plays `script` from a fresh simulator into `pipeline` under a virtual clock.
pub fn run_loopback(
    script: GestureScript,
    model: EmgSynthModel,
    pipeline: HostPipeline,
) -> Result<LoopbackRun, PipelineError> {
    let mut host = LoopbackHost::new(pipeline);
    let sim = Simulator::new(script, model)?;
    match run_simulator(sim, &mut host, &mut VirtualClock) {
        Ok(device) => Ok(LoopbackRun { host, device }),
        Err(e) => Err(host.error.take().unwrap_or(e.into())),
    }
}

/// Collects the EMG samples a simulator emits, stamped the way the host
/// stamps them.
#[derive(Debug)]
struct FrameCollector {
    reader: FrameReader,
    frames: Vec<EmgFrame>,
    period_us: u64,
    sent_mode: bool,
}

impl Transport for FrameCollector {
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportClosed> {
        for f in self.reader.read(bytes).map_err(|_| TransportClosed)? {
            if let Ok(DeviceMessage::Emg(p)) = DeviceMessage::from_frame(&f) {
                let t = self.frames.len() as u64 * self.period_us;
                let (a, b) = p.to_frames(t, self.period_us);
                self.frames.extend([a, b]);
            }
        }
        Ok(())
    }

    fn try_recv(&mut self) -> Result<Option<Vec<u8>>, TransportClosed> {
        if self.sent_mode {
            return Ok(None);
        }
        self.sent_mode = true;
        Ok(Some(encode_commands(&[Command::STREAM_ALL])))
    }
}

/// Raw frames for a script, decoded from the simulator's wire output.
pub fn simulated_frames(
    script: &GestureScript,
    model: &EmgSynthModel,
    config: &FeatureConfig,
) -> Result<Vec<EmgFrame>, PipelineError> {
    let mut collector = FrameCollector {
        reader: FrameReader::new(),
        frames: Vec::new(),
        period_us: config.window_spec().sample_period_us(),
        sent_mode: false,
    };
    run_simulator(Simulator::new(script.clone(), model.clone())?, &mut collector, &mut VirtualClock)?;
    Ok(collector.frames)
}

/// Windows lying entirely in the steady part of each script entry, i.e.
/// starting at least one ramp after the entry begins.
pub fn steady_windows(
    script: &GestureScript,
    frames: &[EmgFrame],
    config: &FeatureConfig,
) -> Result<BTreeMap<GestureLabel, Vec<EmgWindow>>, PipelineError> {
    let mut out: BTreeMap<GestureLabel, Vec<EmgWindow>> = BTreeMap::new();
    for entry in script.entries() {
        let lo = (entry.start_ms + RAMP_MS) * 1000;
        let hi = entry.end_ms() * 1000;
        let span: Vec<EmgFrame> =
            frames.iter().filter(|f| f.timestamp_us >= lo && f.timestamp_us < hi).copied().collect();
        let windows = slide_windows(&span, &config.window_spec())?;
        out.entry(entry.label).or_default().extend(windows);
    }
    Ok(out)
}

/// Labelled steady-state windows for every gesture in `labels`, each held
/// for `hold_ms`.
pub fn simulated_gesture_windows(
    labels: &[GestureLabel],
    hold_ms: u64,
    model: &EmgSynthModel,
    config: &FeatureConfig,
) -> Result<BTreeMap<GestureLabel, Vec<EmgWindow>>, PipelineError> {
    let script = GestureScript::calibration(labels, hold_ms, 500)?;
    let frames = simulated_frames(&script, model, config)?;
    steady_windows(&script, &frames, config)
}

/// Builds a template database from simulator output.
pub fn calibrate_from_simulator(
    labels: &[GestureLabel],
    hold_ms: u64,
    model: &EmgSynthModel,
    config: &FeatureConfig,
    min_windows: usize,
) -> Result<TemplateDatabase, PipelineError> {
    let mut cal = CalibrationSet::new(config.clone())?;
    for (label, windows) in simulated_gesture_windows(labels, hold_ms, model, config)? {
        cal.record(label, &windows)?;
    }
    Ok(cal.finalize(min_windows)?)
}
