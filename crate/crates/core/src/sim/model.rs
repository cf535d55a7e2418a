use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::emg::{GestureLabel, CHANNELS};

/// Per-gesture muscle activation pattern over the eight electrodes.
pub type GainProfile = [f64; CHANNELS];

/// Synthetic EMG: each sample is `gain * amplitude * n + baseline * m`
/// with independent standard normals `n` (scaled by `noise_std`) and `m`,
/// rounded and clamped to i8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgSynthModel {
    pub baseline_amp: f64,
    pub amplitude: f64,
    pub noise_std: f64,
    pub gains: BTreeMap<GestureLabel, GainProfile>,
    pub seed: u64,
}

impl Default for EmgSynthModel {
    fn default() -> Self {
        use GestureLabel::*;
        let gains = BTreeMap::from([
            (Rest, [0.0; CHANNELS]),
            // flexors
            (Fist, [1.0, 0.9, 0.8, 0.7, 0.15, 0.1, 0.1, 0.15]),
            // extensors
            (FingersSpread, [0.15, 0.1, 0.1, 0.15, 1.0, 0.9, 0.8, 0.7]),
            (WaveOut, [0.1, 0.05, 0.05, 0.1, 0.2, 0.9, 1.0, 0.8]),
            (WaveIn, [0.2, 0.9, 1.0, 0.8, 0.1, 0.05, 0.05, 0.1]),
        ]);
        Self { baseline_amp: 2.0, amplitude: 40.0, noise_std: 1.0, gains, seed: 0 }
    }
}

impl EmgSynthModel {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::BadModel(m));
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return bad(format!("noise_std must be positive, got {}", self.noise_std));
        }
        if !(self.baseline_amp.is_finite() && self.baseline_amp >= 0.0) {
            return bad(format!("baseline_amp must be non-negative, got {}", self.baseline_amp));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return bad(format!("amplitude must be positive, got {}", self.amplitude));
        }
        for label in GestureLabel::TEMPLATE_LABELS {
            let Some(g) = self.gains.get(&label) else {
                return bad(format!("no gain profile for {label}"));
            };
            if g.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return bad(format!("{label} gains must lie in [0, 1]"));
            }
            if label == GestureLabel::Rest {
                if g.iter().any(|x| *x != 0.0) {
                    return bad("rest gains must be zero".into());
                }
            } else if !g.iter().any(|x| *x >= 0.5) {
                return bad(format!("{label} needs at least one channel with gain >= 0.5"));
            }
        }
        if self.gains.contains_key(&GestureLabel::Unknown) {
            return bad("unknown has no gain profile".into());
        }
        let profiles: Vec<_> = self.gains.values().collect();
        for (i, a) in profiles.iter().enumerate() {
            if profiles[i + 1..].contains(a) {
                return bad("two gestures share a gain profile".into());
            }
        }
        Ok(())
    }

    pub fn gains_for(&self, label: GestureLabel) -> GainProfile {
        self.gains.get(&label).copied().unwrap_or([0.0; CHANNELS])
    }

    pub fn sample<R: Rng + ?Sized>(&self, gain: f64, rng: &mut R) -> i8 {
        let n: f64 = rng.sample(StandardNormal);
        let m: f64 = rng.sample(StandardNormal);
        let v = gain * self.amplitude * self.noise_std * n + self.baseline_amp * m;
        v.round().clamp(-128.0, 127.0) as i8
    }

    pub fn synth_frame<R: Rng + ?Sized>(&self, gains: &GainProfile, rng: &mut R) -> [i8; CHANNELS] {
        let mut out = [0i8; CHANNELS];
        for (o, g) in out.iter_mut().zip(gains) {
            *o = self.sample(*g, rng);
        }
        out
    }
}

/// One sample on one channel for a steady gesture.
pub fn synth_sample<R: Rng + ?Sized>(model: &EmgSynthModel, label: GestureLabel, channel: usize, rng: &mut R) -> i8 {
    model.sample(model.gains_for(label)[channel], rng)
}

/// Linear blend from `from` to `to`, `frac` in [0, 1].
pub fn blend(from: &GainProfile, to: &GainProfile, frac: f64) -> GainProfile {
    let f = frac.clamp(0.0, 1.0);
    let mut out = [0.0; CHANNELS];
    for (i, o) in out.iter_mut().enumerate() {
        *o = from[i] + (to[i] - from[i]) * f;
    }
    out
}
