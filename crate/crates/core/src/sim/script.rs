use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::emg::GestureLabel;
use crate::session::{ExercisePlan, SessionParams};

/// Length of the linear amplitude ramp at every gesture change.
pub const RAMP_MS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub label: GestureLabel,
    pub start_ms: u64,
    pub duration_ms: u64,
}

impl ScriptEntry {
    pub fn end_ms(&self) -> u64 {
        self.start_ms + self.duration_ms
    }
}

/// Timeline of gestures performed by the simulated wearer. Gaps between
/// entries are rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ScriptEntry>", into = "Vec<ScriptEntry>")]
pub struct GestureScript {
    entries: Vec<ScriptEntry>,
    total_ms: u64,
}

impl TryFrom<Vec<ScriptEntry>> for GestureScript {
    type Error = SimError;

    fn try_from(entries: Vec<ScriptEntry>) -> Result<Self, SimError> {
        Self::new(entries)
    }
}

impl From<GestureScript> for Vec<ScriptEntry> {
    fn from(s: GestureScript) -> Self {
        s.entries
    }
}

impl GestureScript {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, SimError> {
        let total_ms = entries.last().map_or(0, ScriptEntry::end_ms);
        Self::with_total(entries, total_ms)
    }

    /// Like [`GestureScript::new`] but keeps running (at rest) until `total_ms`.
    pub fn with_total(entries: Vec<ScriptEntry>, total_ms: u64) -> Result<Self, SimError> {
        let mut prev_end = 0;
        for e in &entries {
            if e.label == GestureLabel::Unknown {
                return Err(SimError::BadScript("unknown is not a performable gesture".into()));
            }
            if e.duration_ms == 0 {
                return Err(SimError::BadScript(format!("zero-length entry at {} ms", e.start_ms)));
            }
            if e.start_ms < prev_end {
                return Err(SimError::BadScript(format!(
                    "entry at {} ms overlaps or precedes the previous one ending at {prev_end} ms",
                    e.start_ms
                )));
            }
            prev_end = e.end_ms();
        }
        if total_ms < prev_end {
            return Err(SimError::BadScript(format!("total {total_ms} ms cuts off the last entry")));
        }
        Ok(Self { entries, total_ms })
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimError::BadScript(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| SimError::BadScript(e.to_string()))
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    pub fn total_ms(&self) -> u64 {
        self.total_ms
    }

    pub fn label_at(&self, t_ms: u64) -> GestureLabel {
        self.entries.iter().find(|e| e.start_ms <= t_ms && t_ms < e.end_ms()).map_or(GestureLabel::Rest, |e| e.label)
    }

    /// The gesture at `t_ms`, the one before the most recent change, and the
    /// time since that change. Used to ramp amplitudes.
    pub fn transition_at(&self, t_ms: u64) -> (GestureLabel, GestureLabel, u64) {
        // boundaries are entry starts and ends; the latest one <= t wins
        let mut boundary = 0;
        let mut prev = GestureLabel::Rest;
        let mut cur = GestureLabel::Rest;
        for e in &self.entries {
            if e.start_ms > t_ms {
                break;
            }
            if e.end_ms() <= t_ms {
                boundary = e.end_ms();
                prev = e.label;
                cur = GestureLabel::Rest;
            } else {
                boundary = e.start_ms;
                prev = if boundary == 0 { GestureLabel::Rest } else { self.label_at(boundary - 1) };
                cur = e.label;
            }
        }
        (cur, prev, t_ms - boundary)
    }

    /// Script of a wearer who follows `plan` perfectly: sync gesture, then
    /// every rep held past the required time, resting through each rest.
    pub fn perfect_session(plan: &ExercisePlan, params: &SessionParams, opts: &SessionScriptOptions) -> Self {
        let mut entries = Vec::new();
        let mut t = opts.lead_in_ms;
        let sync_ms = params.sync_hold_ms + opts.sync_extra_ms;
        entries.push(ScriptEntry { label: GestureLabel::WaveOut, start_ms: t, duration_ms: sync_ms });
        t += sync_ms + opts.settle_ms;
        for spec in plan.exercises() {
            let hold_ms = spec.hold_us() / 1000 + opts.hold_margin_ms;
            for set in 0..spec.sets {
                for rep in 0..spec.reps_per_set {
                    if rep == 0 {
                        if let Some(w) = &opts.wrong_gesture {
                            entries.push(ScriptEntry { label: w.label, start_ms: t, duration_ms: w.duration_ms });
                            t += w.duration_ms + opts.settle_ms;
                        }
                    }
                    entries.push(ScriptEntry { label: spec.target, start_ms: t, duration_ms: hold_ms });
                    t += hold_ms;
                    let last_in_set = rep + 1 == spec.reps_per_set;
                    let last_overall = last_in_set && set + 1 == spec.sets;
                    t += if last_in_set || last_overall {
                        spec.set_rest_us() / 1000 + 2 * opts.rest_margin_ms
                    } else {
                        spec.rep_rest_us() / 1000 + opts.rest_margin_ms
                    };
                }
            }
        }
        Self::with_total(entries, t).expect("generated script is ordered")
    }

    /// Each label held for `hold_ms` with `gap_ms` of rest between them.
    pub fn calibration(labels: &[GestureLabel], hold_ms: u64, gap_ms: u64) -> Result<Self, SimError> {
        let mut entries = Vec::new();
        let mut t = gap_ms;
        for label in labels {
            entries.push(ScriptEntry { label: *label, start_ms: t, duration_ms: hold_ms });
            t += hold_ms + gap_ms;
        }
        Self::with_total(entries, t)
    }
}

/// A wrong gesture performed at the start of every set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrongGesture {
    pub label: GestureLabel,
    pub duration_ms: u64,
}

/// Slack added around the engine's timing so recognition latency never
/// makes the scripted wearer fall out of step with the session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionScriptOptions {
    pub lead_in_ms: u64,
    /// Sync gesture length beyond the required hold. Kept short: a sync
    /// gesture still held after the prompt counts as a wrong movement.
    pub sync_extra_ms: u64,
    pub settle_ms: u64,
    pub hold_margin_ms: u64,
    pub rest_margin_ms: u64,
    pub wrong_gesture: Option<WrongGesture>,
}

impl Default for SessionScriptOptions {
    fn default() -> Self {
        Self {
            lead_in_ms: 1000,
            sync_extra_ms: 300,
            settle_ms: 1000,
            hold_margin_ms: 1000,
            rest_margin_ms: 1000,
            wrong_gesture: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use GestureLabel::*;

    fn e(label: GestureLabel, start_ms: u64, duration_ms: u64) -> ScriptEntry {
        ScriptEntry { label, start_ms, duration_ms }
    }

    #[test]
    fn validation() {
        assert!(GestureScript::new(vec![e(Fist, 0, 100), e(WaveIn, 50, 100)]).is_err());
        assert!(GestureScript::new(vec![e(Fist, 100, 100), e(WaveIn, 0, 50)]).is_err());
        assert!(GestureScript::new(vec![e(Unknown, 0, 100)]).is_err());
        assert!(GestureScript::new(vec![e(Fist, 0, 0)]).is_err());
        let s = GestureScript::new(vec![e(Fist, 0, 100), e(WaveIn, 100, 100)]).unwrap();
        assert_eq!(s.total_ms(), 200);
    }

    #[test]
    fn gaps_are_rest() {
        let s = GestureScript::new(vec![e(Fist, 100, 100), e(WaveIn, 300, 100)]).unwrap();
        assert_eq!(s.label_at(50), Rest);
        assert_eq!(s.label_at(100), Fist);
        assert_eq!(s.label_at(250), Rest);
        assert_eq!(s.label_at(399), WaveIn);
        assert_eq!(s.label_at(400), Rest);
    }

    #[test]
    fn transitions() {
        let s = GestureScript::new(vec![e(Fist, 100, 100), e(WaveIn, 200, 100)]).unwrap();
        assert_eq!(s.transition_at(50), (Rest, Rest, 50));
        assert_eq!(s.transition_at(130), (Fist, Rest, 30));
        assert_eq!(s.transition_at(210), (WaveIn, Fist, 10));
        assert_eq!(s.transition_at(320), (Rest, WaveIn, 20));
    }

    #[test]
    fn json_is_a_plain_list() {
        let json = r#"[{"label": "wave_out", "start_ms": 0, "duration_ms": 1500},
                       {"label": "fist", "start_ms": 2000, "duration_ms": 6000}]"#;
        let s: GestureScript = serde_json::from_str(json).unwrap();
        assert_eq!(s.entries().len(), 2);
        assert_eq!(s.total_ms(), 8000);
        let back: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(back[1]["label"], "fist");
        assert!(
            serde_json::from_str::<GestureScript>(r#"[{"label": "fist", "start_ms": 5, "duration_ms": 0}]"#).is_err()
        );
    }

    #[test]
    fn perfect_session_layout() {
        let plan = ExercisePlan::default();
        let s = GestureScript::perfect_session(&plan, &SessionParams::default(), &SessionScriptOptions::default());
        let holds = s.entries().iter().filter(|e| e.label == Fist).count();
        assert_eq!(holds, 15);
        assert_eq!(s.entries().iter().filter(|e| e.label == FingersSpread).count(), 15);
        assert_eq!(s.entries()[0].label, WaveOut);
        assert!(s.entries().iter().skip(1).all(|e| e.duration_ms == 6000));

        let opts = SessionScriptOptions {
            wrong_gesture: Some(WrongGesture { label: WaveIn, duration_ms: 1000 }),
            ..Default::default()
        };
        let s = GestureScript::perfect_session(&plan, &SessionParams::default(), &opts);
        assert_eq!(s.entries().iter().filter(|e| e.label == WaveIn).count(), 6);
    }
}
