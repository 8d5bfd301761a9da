//! Fixed-step classical Runge-Kutta integration.

use serde::Serialize;
use thiserror::Error;

use super::{OdeSystem, State};

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("integration step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("horizon end {t1} precedes start {t0}")]
    InvalidHorizon { t0: f64, t1: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
}

/// One classical RK4 step of size `dt` from `(state, t)`.
pub fn rk4_step<S: State>(rhs: impl Fn(&S, f64) -> S, state: &S, t: f64, dt: f64) -> S {
    let half = 0.5 * dt;
    let k1 = rhs(state, t);
    let k2 = rhs(&state.zip_with(&k1, |y, k| y + half * k), t + half);
    let k3 = rhs(&state.zip_with(&k2, |y, k| y + half * k), t + half);
    let k4 = rhs(&state.zip_with(&k3, |y, k| y + dt * k), t + dt);
    S::from_fn(|i| {
        let incr = k1.component(i) + 2.0 * k2.component(i) + 2.0 * k3.component(i) + k4.component(i);
        state.component(i) + dt / 6.0 * incr
    })
}

/// Snapshots on the uniform grid `t0, t0+dt, …`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<S> {
    pub model: &'static str,
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<S>,
}

impl<S: State> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.states.len()).map(|i| self.time(i))
    }

    pub fn first(&self) -> &S {
        &self.states[0]
    }

    pub fn last(&self) -> &S {
        &self.states[self.states.len() - 1]
    }

    /// Largest `|Σ(t) − Σ(t0)| / |Σ(t0)|` over the trajectory.
    pub fn mass_drift(&self) -> f64 {
        let initial = self.first().total();
        let scale = if initial == 0.0 { 1.0 } else { initial.abs() };
        self.states
            .iter()
            .map(|s| (s.total() - initial).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Most negative component and its time, if any component went below zero.
    ///
    /// Integration never clamps; callers decide whether a small negative value
    /// is tolerable noise.
    pub fn most_negative(&self) -> Option<(f64, f64)> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| (self.time(i), s.min_component()))
            .filter(|&(_, v)| v < 0.0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Every `stride`-th snapshot, starting with the first.
    pub fn sample_every(&self, stride: usize) -> Vec<S> {
        self.states.iter().step_by(stride.max(1)).copied().collect()
    }
}

/// Number of RK4 steps needed to reach `t1` from `t0`, `⌈(t1 − t0)/dt⌉`.
pub fn step_count(t0: f64, t1: f64, dt: f64) -> usize {
    let ratio = (t1 - t0) / dt;
    // absorb representation error so that e.g. 1.0 / 0.05 gives 20 steps
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Integrate `system` from `init` at `t0` to `t1` with step `dt`.
///
/// Produces `⌈(t1−t0)/dt⌉ + 1` snapshots on a uniform grid (the last grid
/// point may lie slightly past `t1` when `dt` does not divide the horizon).
pub fn integrate<M: OdeSystem>(
    system: &M,
    init: M::State,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory<M::State>, OdeError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(OdeError::InvalidStep(dt));
    }
    if !(t1 >= t0) {
        return Err(OdeError::InvalidHorizon { t0, t1 });
    }
    if !init.is_finite() {
        return Err(OdeError::NonFinite { t: t0 });
    }
    let steps = step_count(t0, t1, dt);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(init);
    let mut current = init;
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        current = rk4_step(|y, t| system.rhs(y, t), &current, t, dt);
        if !current.is_finite() {
            return Err(OdeError::NonFinite { t: t + dt });
        }
        states.push(current);
    }
    Ok(Trajectory {
        model: M::State::MODEL,
        t0,
        dt,
        states,
    })
}
