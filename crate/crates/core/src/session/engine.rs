//! Exercise session state machine.
//!
//! The engine is driven by two inputs: window classifications and clock
//! ticks. Both carry a time in microseconds on the same monotonic timeline
//! (in practice the EMG sample clock) and both may emit feedback events.
//!
//! Time credit: every classification stands for the interval since the
//! previous classification, capped at `dropout_ms`. A hold or a gesture run
//! accumulates the credited intervals of its classifications, so the first
//! classification of a session credits nothing.

use serde::{Deserialize, Serialize};

use super::event::{FeedbackEvent, TimedEvent, SYNC_VIBRATION};
use super::plan::{ExercisePlan, ExerciseSpec, SessionParams};
use super::SessionError;
use crate::emg::{Classification, GestureLabel};

/// A run of classifications of one gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GestureRun {
    pub label: GestureLabel,
    pub credited_us: u64,
    pub last_seen_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    /// Waiting for the sync gesture.
    AwaitingSync {
        run: Option<GestureRun>,
    },
    /// Target shown, waiting for the patient to perform it.
    Prompting {
        wrong: Option<GestureRun>,
    },
    /// Target recognized, accumulating hold time.
    Holding {
        held_us: u64,
        last_target_us: u64,
        wrong: Option<GestureRun>,
    },
    RepRest {
        until_us: u64,
    },
    SetRest {
        until_us: u64,
    },
    Completed,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::AwaitingSync { .. } => "awaiting_sync",
            Phase::Prompting { .. } => "prompting",
            Phase::Holding { .. } => "holding",
            Phase::RepRest { .. } => "rep_rest",
            Phase::SetRest { .. } => "set_rest",
            Phase::Completed => "completed",
        }
    }
}

/// Read-only view of a session for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub phase: String,
    pub exercise_index: u32,
    pub exercise_count: u32,
    pub target: GestureLabel,
    pub set: u32,
    pub sets: u32,
    pub rep: u32,
    pub reps_per_set: u32,
    /// Reps finished in the current set.
    pub reps_completed: u32,
    /// Sets finished in the current exercise.
    pub sets_completed: u32,
    pub exercises_completed: u32,
    pub total_reps_completed: u32,
    pub total_reps: u32,
    pub held_ms: u64,
    pub held_fraction: f64,
    pub rest_until_us: Option<u64>,
    pub t_us: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Session {
    plan: ExercisePlan,
    params: SessionParams,
    phase: Phase,
    exercise: usize,
    set: u32,
    rep: u32,
    total_reps_done: u32,
    last_t: Option<u64>,
    last_classification_t: Option<u64>,
}

impl Session {
    pub fn new(plan: ExercisePlan, params: SessionParams) -> Result<Self, SessionError> {
        plan.validate()?;
        Ok(Self {
            plan,
            params,
            phase: Phase::AwaitingSync { run: None },
            exercise: 0,
            set: 0,
            rep: 0,
            total_reps_done: 0,
            last_t: None,
            last_classification_t: None,
        })
    }

    pub fn plan(&self) -> &ExercisePlan {
        &self.plan
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn is_completed(&self) -> bool {
        self.phase == Phase::Completed
    }

    fn spec(&self) -> &ExerciseSpec {
        &self.plan.0[self.exercise]
    }

    fn dropout_us(&self) -> u64 {
        self.params.dropout_ms * 1000
    }

    fn check_time(&self, t_us: u64) -> Result<(), SessionError> {
        match self.last_t {
            Some(last) if t_us < last => Err(SessionError::NonMonotonicInput { last, got: t_us }),
            _ => Ok(()),
        }
    }

    /// Advances timers to `now`: rest periods expire into the next prompt and
    /// stale holds or runs decay.
    pub fn tick(&mut self, now_us: u64) -> Result<Vec<TimedEvent>, SessionError> {
        self.check_time(now_us)?;
        self.last_t = Some(now_us);
        let mut out = Vec::new();
        self.advance_timers(now_us, &mut out);
        Ok(out)
    }

    pub fn on_classification(&mut self, c: &Classification) -> Result<Vec<TimedEvent>, SessionError> {
        let t = c.timestamp_us;
        self.check_time(t)?;
        self.last_t = Some(t);
        let mut out = Vec::new();
        self.advance_timers(t, &mut out);

        let dropout = self.dropout_us();
        let credit = self.last_classification_t.map_or(0, |p| (t - p).min(dropout));
        self.last_classification_t = Some(t);

        let target = self.spec().target;
        let label = c.label;
        match self.phase.clone() {
            Phase::AwaitingSync { run } => {
                // strict run: anything but the sync gesture breaks it
                if label != GestureLabel::WaveOut {
                    self.phase = Phase::AwaitingSync { run: None };
                    return Ok(out);
                }
                let run = match run {
                    Some(mut r) => {
                        r.credited_us += credit;
                        r.last_seen_us = t;
                        r
                    }
                    None => GestureRun { label, credited_us: credit, last_seen_us: t },
                };
                if run.credited_us >= self.params.sync_hold_ms * 1000 {
                    emit(&mut out, t, FeedbackEvent::SyncDetected);
                    emit(&mut out, t, FeedbackEvent::VibrateRequested { kind: SYNC_VIBRATION });
                    self.prompt(t, &mut out);
                } else {
                    self.phase = Phase::AwaitingSync { run: Some(run) };
                }
            }
            Phase::Prompting { wrong } => {
                if label == target {
                    self.phase = Phase::Holding { held_us: credit, last_target_us: t, wrong: None };
                    self.check_hold_done(t, &mut out);
                } else if label.is_active() {
                    let run = self.extend_run(wrong, label, credit, t);
                    self.judge_wrong(run, t, &mut out, |wrong| Phase::Prompting { wrong });
                }
            }
            // holds broken for longer than the dropout were already sent
            // back to Prompting by advance_timers
            Phase::Holding { held_us, last_target_us, wrong } => {
                if label == target {
                    self.phase = Phase::Holding { held_us: held_us + credit, last_target_us: t, wrong: None };
                    self.check_hold_done(t, &mut out);
                } else if label.is_active() {
                    let run = self.extend_run(wrong, label, credit, t);
                    self.judge_wrong(run, t, &mut out, |wrong| Phase::Holding { held_us, last_target_us, wrong });
                }
            }
            Phase::RepRest { .. } | Phase::SetRest { .. } | Phase::Completed => {}
        }
        Ok(out)
    }

    fn extend_run(&self, run: Option<GestureRun>, label: GestureLabel, credit: u64, t: u64) -> GestureRun {
        match run {
            Some(mut r) if r.label == label && t - r.last_seen_us <= self.dropout_us() => {
                r.credited_us += credit;
                r.last_seen_us = t;
                r
            }
            _ => GestureRun { label, credited_us: credit, last_seen_us: t },
        }
    }

    /// Emits an incorrect-movement verdict and re-prompts once `run` has
    /// lasted long enough, otherwise stores it via `keep`.
    fn judge_wrong(
        &mut self,
        run: GestureRun,
        t: u64,
        out: &mut Vec<TimedEvent>,
        keep: impl FnOnce(Option<GestureRun>) -> Phase,
    ) {
        if run.credited_us >= self.params.wrong_ms * 1000 {
            emit(out, t, FeedbackEvent::IncorrectMovement { observed: run.label });
            self.prompt(t, out);
        } else {
            self.phase = keep(Some(run));
        }
    }

    fn prompt(&mut self, t: u64, out: &mut Vec<TimedEvent>) {
        emit(out, t, FeedbackEvent::Prompt { target: self.spec().target, set: self.set, rep: self.rep });
        self.phase = Phase::Prompting { wrong: None };
    }

    fn check_hold_done(&mut self, t: u64, out: &mut Vec<TimedEvent>) {
        let Phase::Holding { held_us, .. } = self.phase else { return };
        if held_us < self.spec().hold_us() {
            return;
        }
        emit(out, t, FeedbackEvent::CorrectMovement);
        self.rep += 1;
        self.total_reps_done += 1;
        emit(out, t, FeedbackEvent::RepCounted { rep: self.rep });

        let spec = self.spec().clone();
        if self.rep < spec.reps_per_set {
            self.rest(t, spec.rep_rest_us(), false, out);
            return;
        }
        emit(out, t, FeedbackEvent::SetCompleted { set: self.set });
        self.rep = 0;
        self.set += 1;
        if self.set < spec.sets {
            self.rest(t, spec.set_rest_us(), true, out);
            return;
        }
        emit(out, t, FeedbackEvent::ExerciseCompleted { exercise: self.exercise as u32 });
        if self.exercise + 1 < self.plan.0.len() {
            self.exercise += 1;
            self.set = 0;
            self.rest(t, spec.set_rest_us(), true, out);
        } else {
            emit(out, t, FeedbackEvent::SessionCompleted);
            self.phase = Phase::Completed;
        }
    }

    fn rest(&mut self, t: u64, duration_us: u64, between_sets: bool, out: &mut Vec<TimedEvent>) {
        if duration_us == 0 {
            self.prompt(t, out);
            return;
        }
        let until_us = t + duration_us;
        self.phase = if between_sets { Phase::SetRest { until_us } } else { Phase::RepRest { until_us } };
    }

    fn advance_timers(&mut self, now: u64, out: &mut Vec<TimedEvent>) {
        let dropout = self.dropout_us();
        let stale = |r: &Option<GestureRun>| r.filter(|r| now - r.last_seen_us <= dropout);
        match self.phase.clone() {
            Phase::RepRest { until_us } | Phase::SetRest { until_us } if now >= until_us => {
                self.prompt(now, out);
            }
            Phase::Holding { last_target_us, wrong, .. } if now - last_target_us > dropout => {
                self.phase = Phase::Prompting { wrong: stale(&wrong) };
            }
            Phase::AwaitingSync { run } => self.phase = Phase::AwaitingSync { run: stale(&run) },
            Phase::Prompting { wrong } => self.phase = Phase::Prompting { wrong: stale(&wrong) },
            _ => {}
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let spec = self.spec();
        let (held_us, rest_until_us) = match &self.phase {
            Phase::Holding { held_us, .. } => (*held_us, None),
            Phase::RepRest { until_us } | Phase::SetRest { until_us } => (0, Some(*until_us)),
            _ => (0, None),
        };
        let completed = self.is_completed();
        SessionSnapshot {
            phase: self.phase.name().to_string(),
            exercise_index: self.exercise as u32,
            exercise_count: self.plan.0.len() as u32,
            target: spec.target,
            set: self.set.min(spec.sets - 1),
            sets: spec.sets,
            rep: self.rep,
            reps_per_set: spec.reps_per_set,
            reps_completed: if completed { spec.reps_per_set } else { self.rep },
            sets_completed: if completed { spec.sets } else { self.set },
            exercises_completed: if completed { self.plan.0.len() as u32 } else { self.exercise as u32 },
            total_reps_completed: self.total_reps_done,
            total_reps: self.plan.total_reps(),
            held_ms: held_us / 1000,
            held_fraction: (held_us as f64 / spec.hold_us() as f64).min(1.0),
            rest_until_us,
            t_us: self.last_t,
        }
    }
}

fn emit(out: &mut Vec<TimedEvent>, t_us: u64, event: FeedbackEvent) {
    out.push(TimedEvent { t_us, event });
}
