//! Time-domain EMG features computed per channel over a window.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::frame::{EmgWindow, WindowSpec};
use super::{EmgError, CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Mean absolute value.
    Mav,
    /// Root mean square.
    Rms,
    /// Waveform length.
    Wl,
    /// Zero crossings above the deadband.
    Zc,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [FeatureKind::Mav, FeatureKind::Rms, FeatureKind::Wl, FeatureKind::Zc];

    fn code(self) -> u8 {
        match self {
            FeatureKind::Mav => 1,
            FeatureKind::Rms => 2,
            FeatureKind::Wl => 3,
            FeatureKind::Zc => 4,
        }
    }
}

/// Everything that determines how a window becomes a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub window_ms: u32,
    pub step_ms: u32,
    pub features: Vec<FeatureKind>,
    pub zc_deadband: f64,
}

/// Default zero-crossing deadband in raw counts.
pub const DEFAULT_ZC_DEADBAND: f64 = 2.0;

impl Default for FeatureConfig {
    fn default() -> Self {
        let spec = WindowSpec::default();
        Self {
            sample_rate_hz: spec.sample_rate_hz,
            window_ms: spec.window_ms,
            step_ms: spec.step_ms,
            features: FeatureKind::ALL.to_vec(),
            zc_deadband: DEFAULT_ZC_DEADBAND,
        }
    }
}

impl FeatureConfig {
    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec::new(self.sample_rate_hz, self.window_ms, self.step_ms)
    }

    pub fn dimension(&self) -> usize {
        CHANNELS * self.features.len()
    }

    pub fn validate(&self) -> Result<(), EmgError> {
        self.window_spec().frame_counts()?;
        if self.features.is_empty() {
            return Err(EmgError::BadConfig("no features enabled".into()));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].contains(f) {
                return Err(EmgError::BadConfig(format!("feature {f:?} listed twice")));
            }
        }
        if !(self.zc_deadband >= 0.0 && self.zc_deadband.is_finite()) {
            return Err(EmgError::BadConfig(format!("invalid deadband {}", self.zc_deadband)));
        }
        Ok(())
    }

    /// Stable identifier of these settings (FNV-1a over a canonical encoding).
    pub fn id(&self) -> FeatureConfigId {
        let mut bytes = Vec::with_capacity(24 + self.features.len());
        bytes.extend_from_slice(&self.sample_rate_hz.to_le_bytes());
        bytes.extend_from_slice(&self.window_ms.to_le_bytes());
        bytes.extend_from_slice(&self.step_ms.to_le_bytes());
        bytes.extend(self.features.iter().map(|f| f.code()));
        bytes.extend_from_slice(&self.zc_deadband.to_bits().to_le_bytes());
        let hash = bytes
            .iter()
            .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3));
        FeatureConfigId(hash)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureConfigId(pub u64);

impl fmt::Display for FeatureConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Channel-major feature values: all features of channel 0, then channel 1...
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub config_id: FeatureConfigId,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, config_id: FeatureConfigId) -> Self {
        Self { values, config_id }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

pub fn mean_absolute_value(signal: &[f64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    signal.iter().map(|x| x.abs()).sum::<f64>() / signal.len() as f64
}

pub fn root_mean_square(signal: &[f64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    (signal.iter().map(|x| x * x).sum::<f64>() / signal.len() as f64).sqrt()
}

pub fn waveform_length(signal: &[f64]) -> f64 {
    signal.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
}

/// Counts sign changes between neighbours whose difference exceeds
/// `deadband`. Zero-valued samples have no sign and never cross.
pub fn zero_crossings(signal: &[f64], deadband: f64) -> u32 {
    signal
        .windows(2)
        .filter(|p| {
            let (a, b) = (p[0], p[1]);
            ((a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0)) && (a - b).abs() > deadband
        })
        .count() as u32
}

pub fn mav(window: &EmgWindow, channel: usize) -> Result<f64, EmgError> {
    Ok(mean_absolute_value(&window.channel(channel)?))
}

pub fn rms(window: &EmgWindow, channel: usize) -> Result<f64, EmgError> {
    Ok(root_mean_square(&window.channel(channel)?))
}

pub fn wl(window: &EmgWindow, channel: usize) -> Result<f64, EmgError> {
    Ok(waveform_length(&window.channel(channel)?))
}

pub fn zc(window: &EmgWindow, channel: usize, deadband: f64) -> Result<u32, EmgError> {
    if deadband.is_nan() || deadband < 0.0 {
        return Err(EmgError::BadConfig(format!("invalid deadband {deadband}")));
    }
    Ok(zero_crossings(&window.channel(channel)?, deadband))
}

pub fn featurize(window: &EmgWindow, config: &FeatureConfig) -> Result<FeatureVector, EmgError> {
    config.validate()?;
    if window.window_len_ms() != config.window_ms {
        return Err(EmgError::BadWindow(format!(
            "window spans {} ms, config expects {} ms",
            window.window_len_ms(),
            config.window_ms
        )));
    }
    let mut values = Vec::with_capacity(config.dimension());
    for ch in 0..CHANNELS {
        let signal = window.channel(ch)?;
        for kind in &config.features {
            values.push(match kind {
                FeatureKind::Mav => mean_absolute_value(&signal),
                FeatureKind::Rms => root_mean_square(&signal),
                FeatureKind::Wl => waveform_length(&signal),
                FeatureKind::Zc => f64::from(zero_crossings(&signal, config.zc_deadband)),
            });
        }
    }
    Ok(FeatureVector::new(values, config.id()))
}
