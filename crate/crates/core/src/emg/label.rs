use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Hand gestures known to the recognizer.
///
/// The declaration order is significant: it is the tie-break order used by
/// the classifier and the iteration order of template maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureLabel {
    Rest,
    Fist,
    FingersSpread,
    WaveOut,
    WaveIn,
    /// Produced only when a window is rejected by the classifier.
    Unknown,
}

impl GestureLabel {
    /// Every label that may own a template, in tie-break order.
    pub const TEMPLATE_LABELS: [GestureLabel; 5] = [
        GestureLabel::Rest,
        GestureLabel::Fist,
        GestureLabel::FingersSpread,
        GestureLabel::WaveOut,
        GestureLabel::WaveIn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GestureLabel::Rest => "rest",
            GestureLabel::Fist => "fist",
            GestureLabel::FingersSpread => "fingers_spread",
            GestureLabel::WaveOut => "wave_out",
            GestureLabel::WaveIn => "wave_in",
            GestureLabel::Unknown => "unknown",
        }
    }

    /// True for gestures that involve a muscle contraction.
    pub fn is_active(self) -> bool {
        !matches!(self, GestureLabel::Rest | GestureLabel::Unknown)
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown gesture label `{0}`")]
pub struct ParseLabelError(pub String);

impl FromStr for GestureLabel {
    type Err = ParseLabelError;

    /// Accepts the snake_case wire names and the CamelCase variant names,
    /// ignoring case, underscores and dashes.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s.chars().filter(|c| *c != '_' && *c != '-').map(|c| c.to_ascii_lowercase()).collect();
        match folded.as_str() {
            "rest" => Ok(GestureLabel::Rest),
            "fist" => Ok(GestureLabel::Fist),
            "fingersspread" => Ok(GestureLabel::FingersSpread),
            "waveout" => Ok(GestureLabel::WaveOut),
            "wavein" => Ok(GestureLabel::WaveIn),
            "unknown" => Ok(GestureLabel::Unknown),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}
