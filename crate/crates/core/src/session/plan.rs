use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::emg::GestureLabel;

/// One prescribed exercise: hold `target` for `hold_s` seconds,
/// `reps_per_set` times, in `sets` sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseSpec {
    pub target: GestureLabel,
    #[serde(default = "default_hold_s")]
    pub hold_s: f64,
    #[serde(default = "default_reps")]
    pub reps_per_set: u32,
    #[serde(default = "default_sets")]
    pub sets: u32,
    #[serde(default = "default_rep_rest")]
    pub rest_between_reps_s: f64,
    #[serde(default = "default_set_rest")]
    pub rest_between_sets_s: f64,
}

fn default_hold_s() -> f64 {
    5.0
}
fn default_reps() -> u32 {
    5
}
fn default_sets() -> u32 {
    3
}
fn default_rep_rest() -> f64 {
    3.0
}
fn default_set_rest() -> f64 {
    30.0
}

impl ExerciseSpec {
    /// Five-second holds, five reps, three sets.
    pub fn new(target: GestureLabel) -> Self {
        Self {
            target,
            hold_s: default_hold_s(),
            reps_per_set: default_reps(),
            sets: default_sets(),
            rest_between_reps_s: default_rep_rest(),
            rest_between_sets_s: default_set_rest(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.target.is_active() {
            return Err(format!("target must be an active gesture, got {}", self.target));
        }
        if !(self.hold_s > 0.0 && self.hold_s.is_finite()) {
            return Err(format!("hold_s must be positive, got {}", self.hold_s));
        }
        if self.reps_per_set == 0 {
            return Err("reps_per_set must be at least 1".into());
        }
        if self.sets == 0 {
            return Err("sets must be at least 1".into());
        }
        for (name, v) in
            [("rest_between_reps_s", self.rest_between_reps_s), ("rest_between_sets_s", self.rest_between_sets_s)]
        {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn hold_us(&self) -> u64 {
        secs_to_us(self.hold_s)
    }

    pub fn rep_rest_us(&self) -> u64 {
        secs_to_us(self.rest_between_reps_s)
    }

    pub fn set_rest_us(&self) -> u64 {
        secs_to_us(self.rest_between_sets_s)
    }
}

fn secs_to_us(s: f64) -> u64 {
    (s * 1e6).round() as u64
}

/// Ordered list of exercises for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExercisePlan(pub Vec<ExerciseSpec>);

impl Default for ExercisePlan {
    /// Fist, then fingers spread.
    fn default() -> Self {
        Self(vec![ExerciseSpec::new(GestureLabel::Fist), ExerciseSpec::new(GestureLabel::FingersSpread)])
    }
}

impl ExercisePlan {
    pub fn exercises(&self) -> &[ExerciseSpec] {
        &self.0
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.0.is_empty() {
            return Err(SessionError::EmptyPlan);
        }
        for (index, spec) in self.0.iter().enumerate() {
            spec.validate().map_err(|reason| SessionError::InvalidSpec { index, reason })?;
        }
        Ok(())
    }

    pub fn total_reps(&self) -> u32 {
        self.0.iter().map(|e| e.reps_per_set * e.sets).sum()
    }
}

/// Timing thresholds of the state machine, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionParams {
    /// How long the sync gesture must be held to arm the session.
    pub sync_hold_ms: u64,
    /// How long a wrong gesture must persist to count as incorrect.
    pub wrong_ms: u64,
    /// Longest tolerated break in a held gesture.
    pub dropout_ms: u64,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self { sync_hold_ms: 1000, wrong_ms: 500, dropout_ms: 200 }
    }
}

/// On-disk plan: either a bare list of exercises or an object that also
/// overrides the timing thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanFile {
    Exercises(ExercisePlan),
    WithParams {
        exercises: ExercisePlan,
        #[serde(flatten)]
        params: SessionParams,
    },
}

impl PlanFile {
    pub fn into_parts(self) -> (ExercisePlan, SessionParams) {
        match self {
            PlanFile::Exercises(plan) => (plan, SessionParams::default()),
            PlanFile::WithParams { exercises, params } => (exercises, params),
        }
    }

    pub fn parse(json: &str) -> Result<(ExercisePlan, SessionParams), SessionError> {
        let file: PlanFile = serde_json::from_str(json).map_err(|e| SessionError::BadPlanFile(e.to_string()))?;
        let (plan, params) = file.into_parts();
        plan.validate()?;
        Ok((plan, params))
    }

    pub fn load(path: &Path) -> Result<(ExercisePlan, SessionParams), SessionError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SessionError::BadPlanFile(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
