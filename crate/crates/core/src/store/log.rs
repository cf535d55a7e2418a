use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::session::{ExercisePlan, FeedbackEvent, TimedEvent};

/// Timeline of one session's feedback, kept for later review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    /// Wall-clock start, milliseconds since the Unix epoch.
    pub started_at: u64,
    pub plan: ExercisePlan,
    pub events: Vec<TimedEvent>,
    pub completed: bool,
}

impl SessionLog {
    pub fn new(session_id: impl Into<String>, started_at: u64, plan: ExercisePlan) -> Self {
        Self { session_id: session_id.into(), started_at, plan, events: Vec::new(), completed: false }
    }

    pub fn append(&mut self, event: FeedbackEvent, t_us: u64) -> Result<(), StoreError> {
        if self.completed {
            return Err(StoreError::LogClosed);
        }
        if let Some(last) = self.events.last() {
            if t_us < last.t_us {
                return Err(StoreError::NonMonotonicLog { last: last.t_us, got: t_us });
            }
        }
        self.events.push(TimedEvent { t_us, event });
        self.completed = event == FeedbackEvent::SessionCompleted;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if let Some(p) = self.events.windows(2).find(|p| p[1].t_us < p[0].t_us) {
            return Err(StoreError::CorruptLog(format!("time goes back from {} to {}", p[0].t_us, p[1].t_us)));
        }
        let ends_complete = self.events.last().map(|e| e.event) == Some(FeedbackEvent::SessionCompleted);
        if ends_complete != self.completed {
            return Err(StoreError::CorruptLog("completed flag disagrees with final event".into()));
        }
        Ok(())
    }
}

/// `<dir>/<id>.json`
pub fn session_log_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.json"))
}

pub fn save_log(log: &SessionLog, path: &Path) -> Result<(), StoreError> {
    let text = serde_json::to_string_pretty(log).expect("log serializes");
    super::write_atomic(path, text.as_bytes())
}

pub fn load_log(path: &Path) -> Result<SessionLog, StoreError> {
    let text = std::fs::read_to_string(path)?;
    let log: SessionLog = serde_json::from_str(&text).map_err(|e| StoreError::CorruptLog(e.to_string()))?;
    log.validate()?;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emg::GestureLabel;

    fn log() -> SessionLog {
        SessionLog::new("s1", 1_700_000_000_000, ExercisePlan::default())
    }

    #[test]
    fn append_and_order() {
        let mut l = log();
        l.append(FeedbackEvent::SyncDetected, 10).unwrap();
        assert_eq!(l.events.len(), 1);
        l.append(FeedbackEvent::CorrectMovement, 10).unwrap();
        assert_eq!(
            l.append(FeedbackEvent::RepCounted { rep: 1 }, 9),
            Err(StoreError::NonMonotonicLog { last: 10, got: 9 })
        );
        l.append(FeedbackEvent::SessionCompleted, 11).unwrap();
        assert!(l.completed);
        assert_eq!(l.append(FeedbackEvent::SyncDetected, 12), Err(StoreError::LogClosed));
    }

    #[test]
    fn thirty_event_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut l = log();
        for i in 0..29u32 {
            let e = match i % 3 {
                0 => FeedbackEvent::Prompt { target: GestureLabel::Fist, set: i / 10, rep: i % 5 },
                1 => FeedbackEvent::IncorrectMovement { observed: GestureLabel::WaveIn },
                _ => FeedbackEvent::RepCounted { rep: i },
            };
            l.append(e, u64::from(i) * 333_333).unwrap();
        }
        l.append(FeedbackEvent::SessionCompleted, 10_000_000).unwrap();
        let path = session_log_path(dir.path(), &l.session_id);
        save_log(&l, &path).unwrap();
        assert_eq!(load_log(&path).unwrap(), l);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["events"][0]["kind"], "prompt");
        assert!(v["events"][0]["t_us"].is_u64());
        assert_eq!(v["events"][0]["detail"]["target"], "fist");
    }

    #[test]
    fn inconsistent_completed_flag_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let mut l = log();
        l.append(FeedbackEvent::SyncDetected, 1).unwrap();
        l.completed = true;
        let path = dir.path().join("x.json");
        save_log(&l, &path).unwrap();
        assert!(matches!(load_log(&path), Err(StoreError::CorruptLog(_))));
        std::fs::write(&path, "{\"session_id\": ").unwrap();
        assert!(matches!(load_log(&path), Err(StoreError::CorruptLog(_))));
    }
}
