use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{EmgError, CHANNELS};

/// One multi-channel EMG sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmgFrame {
    /// Monotonic sample time in microseconds.
    pub timestamp_us: u64,
    pub channels: [i8; CHANNELS],
}

impl EmgFrame {
    pub fn new(timestamp_us: u64, channels: [i8; CHANNELS]) -> Self {
        Self { timestamp_us, channels }
    }

    /// Builds a frame from an arbitrary slice, rejecting anything that is not
    /// exactly eight channels wide.
    pub fn from_slice(timestamp_us: u64, channels: &[i8]) -> Result<Self, EmgError> {
        let channels: [i8; CHANNELS] = channels.try_into().map_err(|_| {
            EmgError::MalformedStream(format!(
                "frame at {timestamp_us} us has {} channels, expected {CHANNELS}",
                channels.len()
            ))
        })?;
        Ok(Self::new(timestamp_us, channels))
    }
}

/// Sample rate and windowing geometry, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub sample_rate_hz: u32,
    pub window_ms: u32,
    pub step_ms: u32,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { sample_rate_hz: 200, window_ms: 200, step_ms: 50 }
    }
}

impl WindowSpec {
    pub fn new(sample_rate_hz: u32, window_ms: u32, step_ms: u32) -> Self {
        Self { sample_rate_hz, window_ms, step_ms }
    }

    /// Checks the geometry and returns `(frames per window, frames per step)`.
    pub fn frame_counts(&self) -> Result<(usize, usize), EmgError> {
        if self.sample_rate_hz == 0 {
            return Err(EmgError::BadWindow("sample rate must be positive".into()));
        }
        if self.step_ms == 0 {
            return Err(EmgError::BadWindow("step must be at least 1 ms".into()));
        }
        if self.window_ms < self.step_ms {
            return Err(EmgError::BadWindow(format!(
                "window {} ms is shorter than step {} ms",
                self.window_ms, self.step_ms
            )));
        }
        let window = ms_to_frames(self.window_ms, self.sample_rate_hz)?;
        let step = ms_to_frames(self.step_ms, self.sample_rate_hz)?;
        if window < 2 {
            return Err(EmgError::BadWindow(format!("window holds {window} frame(s), need at least 2")));
        }
        Ok((window, step))
    }

    /// Sample period in microseconds (rounded down).
    pub fn sample_period_us(&self) -> u64 {
        1_000_000 / u64::from(self.sample_rate_hz.max(1))
    }
}

fn ms_to_frames(ms: u32, rate: u32) -> Result<usize, EmgError> {
    let scaled = u64::from(ms) * u64::from(rate);
    if scaled % 1000 != 0 {
        return Err(EmgError::BadWindow(format!("{ms} ms is not a whole number of samples at {rate} Hz")));
    }
    Ok((scaled / 1000) as usize)
}

/// A fixed-length run of consecutive frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmgWindow {
    frames: Vec<EmgFrame>,
    window_len_ms: u32,
    step_ms: u32,
}

impl EmgWindow {
    /// Wraps `frames` after checking the count against `spec` and that
    /// timestamps strictly increase.
    pub fn new(frames: Vec<EmgFrame>, spec: &WindowSpec) -> Result<Self, EmgError> {
        let (expected, _) = spec.frame_counts()?;
        if frames.len() != expected {
            return Err(EmgError::BadWindow(format!("window has {} frames, spec requires {expected}", frames.len())));
        }
        check_monotonic(&frames)?;
        Ok(Self { frames, window_len_ms: spec.window_ms, step_ms: spec.step_ms })
    }

    pub fn frames(&self) -> &[EmgFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn window_len_ms(&self) -> u32 {
        self.window_len_ms
    }

    pub fn step_ms(&self) -> u32 {
        self.step_ms
    }

    pub fn start_us(&self) -> u64 {
        self.frames[0].timestamp_us
    }

    pub fn end_us(&self) -> u64 {
        self.frames[self.frames.len() - 1].timestamp_us
    }

    /// Samples of one channel as reals.
    pub fn channel(&self, channel: usize) -> Result<Vec<f64>, EmgError> {
        if channel >= CHANNELS {
            return Err(EmgError::BadChannel(channel));
        }
        Ok(self.frames.iter().map(|f| f64::from(f.channels[channel])).collect())
    }
}

fn check_monotonic(frames: &[EmgFrame]) -> Result<(), EmgError> {
    match frames.windows(2).find(|p| p[1].timestamp_us <= p[0].timestamp_us) {
        Some(p) => Err(EmgError::MalformedStream(format!(
            "timestamp {} us does not follow {} us",
            p[1].timestamp_us, p[0].timestamp_us
        ))),
        None => Ok(()),
    }
}

/// Cuts a finished stream into overlapping windows. A trailing partial
/// window is dropped.
pub fn slide_windows(stream: &[EmgFrame], spec: &WindowSpec) -> Result<Vec<EmgWindow>, EmgError> {
    let (len, step) = spec.frame_counts()?;
    check_monotonic(stream)?;
    let mut out = Vec::new();
    let mut start = 0;
    while start + len <= stream.len() {
        out.push(EmgWindow {
            frames: stream[start..start + len].to_vec(),
            window_len_ms: spec.window_ms,
            step_ms: spec.step_ms,
        });
        start += step;
    }
    Ok(out)
}

/// Incremental counterpart of [`slide_windows`] for live streams. Pushing a
/// stream frame by frame yields the same windows as the batch function.
#[derive(Debug, Clone)]
pub struct Windower {
    spec: WindowSpec,
    len: usize,
    step: usize,
    buf: VecDeque<EmgFrame>,
    last_us: Option<u64>,
}

impl Windower {
    pub fn new(spec: WindowSpec) -> Result<Self, EmgError> {
        let (len, step) = spec.frame_counts()?;
        Ok(Self { spec, len, step, buf: VecDeque::with_capacity(len), last_us: None })
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    pub fn push(&mut self, frame: EmgFrame) -> Result<Option<EmgWindow>, EmgError> {
        if let Some(last) = self.last_us {
            if frame.timestamp_us <= last {
                return Err(EmgError::MalformedStream(format!(
                    "timestamp {} us does not follow {last} us",
                    frame.timestamp_us
                )));
            }
        }
        self.last_us = Some(frame.timestamp_us);
        self.buf.push_back(frame);
        if self.buf.len() < self.len {
            return Ok(None);
        }
        let window = EmgWindow {
            frames: self.buf.iter().copied().collect(),
            window_len_ms: self.spec.window_ms,
            step_ms: self.spec.step_ms,
        };
        self.buf.drain(..self.step);
        Ok(Some(window))
    }

    /// Forgets buffered frames, e.g. after a device reconnect.
    pub fn reset(&mut self) {
        self.buf.clear();
        self.last_us = None;
    }
}
