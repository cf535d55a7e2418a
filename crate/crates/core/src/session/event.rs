use serde::{Deserialize, Serialize};

use crate::emg::GestureLabel;

/// Vibration pattern requested when the sync gesture is recognized.
pub const SYNC_VIBRATION: u8 = 2;

/// Feedback produced by the session engine. Serialized as
/// `{"kind": ..., "detail": {...}}`.
///
/// Counters: `set` and `exercise` are zero-based indices, `rep` in
/// [`FeedbackEvent::Prompt`] is the zero-based index of the rep being asked
/// for and in [`FeedbackEvent::RepCounted`] the number of reps done so far in
/// the current set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum FeedbackEvent {
    SyncDetected,
    VibrateRequested { kind: u8 },
    Prompt { target: GestureLabel, set: u32, rep: u32 },
    CorrectMovement,
    IncorrectMovement { observed: GestureLabel },
    RepCounted { rep: u32 },
    SetCompleted { set: u32 },
    ExerciseCompleted { exercise: u32 },
    SessionCompleted,
}

impl FeedbackEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            FeedbackEvent::SyncDetected => "sync_detected",
            FeedbackEvent::VibrateRequested { .. } => "vibrate_requested",
            FeedbackEvent::Prompt { .. } => "prompt",
            FeedbackEvent::CorrectMovement => "correct_movement",
            FeedbackEvent::IncorrectMovement { .. } => "incorrect_movement",
            FeedbackEvent::RepCounted { .. } => "rep_counted",
            FeedbackEvent::SetCompleted { .. } => "set_completed",
            FeedbackEvent::ExerciseCompleted { .. } => "exercise_completed",
            FeedbackEvent::SessionCompleted => "session_completed",
        }
    }

    /// Audio/visual cue the UI should play for this event, if any.
    pub fn cue(&self) -> Option<&'static str> {
        match self {
            FeedbackEvent::CorrectMovement => Some("correct"),
            FeedbackEvent::IncorrectMovement { .. } => Some("incorrect"),
            FeedbackEvent::SessionCompleted => Some("complete"),
            _ => None,
        }
    }
}

/// A feedback event with the engine time at which it fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t_us: u64,
    #[serde(flatten)]
    pub event: FeedbackEvent,
}
