//! Windowing, feature extraction and gesture classification for 8-channel
//! surface EMG.

mod classify;
mod features;
mod frame;
mod label;

pub use classify::{classify, standardized_distance, Classification, DEFAULT_REJECT_THRESHOLD};
pub use features::{
    featurize, mav, mean_absolute_value, rms, root_mean_square, waveform_length, wl, zc, zero_crossings, FeatureConfig,
    FeatureConfigId, FeatureKind, FeatureVector, DEFAULT_ZC_DEADBAND,
};
pub use frame::{slide_windows, EmgFrame, EmgWindow, WindowSpec, Windower};
pub use label::{GestureLabel, ParseLabelError};

/// Electrodes on the armband.
pub const CHANNELS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmgError {
    #[error("malformed EMG stream: {0}")]
    MalformedStream(String),
    #[error("channel {0} out of range (0..8)")]
    BadChannel(usize),
    #[error("bad window: {0}")]
    BadWindow(String),
    #[error("bad feature settings: {0}")]
    BadConfig(String),
    #[error("feature vector built with config {found}, database expects {expected}")]
    ConfigMismatch { expected: FeatureConfigId, found: FeatureConfigId },
    #[error("template database is empty")]
    EmptyDatabase,
}
