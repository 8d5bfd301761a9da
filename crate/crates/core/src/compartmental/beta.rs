use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("transmission rate must be finite and non-negative, got {0}")]
    NegativeValue(f64),
    #[error("schedule breakpoints must be strictly increasing (segment {index} starts at {start})")]
    UnsortedBreakpoints { index: usize, start: f64 },
    #[error("piecewise schedule needs at least one segment")]
    Empty,
}

/// Transmission rate β(t): either constant or piecewise constant.
///
/// A piecewise schedule is right-continuous: at a breakpoint the new segment's
/// value applies. Before the first breakpoint the first segment's value is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BetaRepr", into = "BetaRepr")]
pub enum BetaSchedule {
    Constant(f64),
    Piecewise(Vec<(f64, f64)>),
}

impl BetaSchedule {
    pub fn constant(value: f64) -> Result<Self, ScheduleError> {
        check_value(value)?;
        Ok(Self::Constant(value))
    }

    /// Segments as `(start_time, value)` pairs.
    pub fn piecewise(segments: Vec<(f64, f64)>) -> Result<Self, ScheduleError> {
        if segments.is_empty() {
            return Err(ScheduleError::Empty);
        }
        for (index, &(start, value)) in segments.iter().enumerate() {
            check_value(value)?;
            if !start.is_finite() || (index > 0 && start <= segments[index - 1].0) {
                return Err(ScheduleError::UnsortedBreakpoints { index, start });
            }
        }
        Ok(Self::Piecewise(segments))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Piecewise(segments) => {
                // index of the first segment starting strictly after t
                let idx = segments.partition_point(|&(start, _)| start <= t);
                segments[idx.saturating_sub(1)].1
            }
        }
    }
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self::Constant(0.0)
    }
}

fn check_value(value: f64) -> Result<(), ScheduleError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ScheduleError::NegativeValue(value))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BetaRepr {
    Constant(f64),
    Piecewise(Vec<(f64, f64)>),
}

impl TryFrom<BetaRepr> for BetaSchedule {
    type Error = ScheduleError;

    fn try_from(repr: BetaRepr) -> Result<Self, Self::Error> {
        match repr {
            BetaRepr::Constant(v) => Self::constant(v),
            BetaRepr::Piecewise(s) => Self::piecewise(s),
        }
    }
}

impl From<BetaSchedule> for BetaRepr {
    fn from(b: BetaSchedule) -> Self {
        match b {
            BetaSchedule::Constant(v) => Self::Constant(v),
            BetaSchedule::Piecewise(s) => Self::Piecewise(s),
        }
    }
}
