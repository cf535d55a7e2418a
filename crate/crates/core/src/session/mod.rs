//! The rehabilitation protocol: sync, prompt, judge the hold, count reps and
//! sets, move on to the next exercise.

mod engine;
mod event;
mod plan;

pub use engine::{GestureRun, Phase, Session, SessionSnapshot};
pub use event::{FeedbackEvent, TimedEvent, SYNC_VIBRATION};
pub use plan::{ExercisePlan, ExerciseSpec, PlanFile, SessionParams};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("exercise plan is empty")]
    EmptyPlan,
    #[error("exercise {index} is invalid: {reason}")]
    InvalidSpec { index: usize, reason: String },
    #[error("bad plan file: {0}")]
    BadPlanFile(String),
    #[error("input at {got} us precedes last input at {last} us")]
    NonMonotonicInput { last: u64, got: u64 },
}
