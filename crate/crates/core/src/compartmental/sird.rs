use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{compartments, BetaSchedule, Damping, OdeSystem};

compartments! {
    /// SIRD occupancies.
    SirdState, "sird" { s => "S", i => "I", r => "R", d => "D" }
}

/// SIRD rates.
///
/// Deaths flow at `gamma` and recoveries at `delta`, in that assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirdParams {
    pub beta: BetaSchedule,
    pub gamma: f64,
    pub delta: f64,
    #[serde(default)]
    pub damping: Damping,
}

impl SirdParams {
    pub fn new(beta: BetaSchedule, gamma: f64, delta: f64) -> Self {
        Self {
            beta,
            gamma,
            delta,
            damping: Damping::Identity,
        }
    }
}

/// `(dS, dI, dR, dD) = (−βIS, βIS − (γ+δ)I, δI, γI)`.
///
/// With a non-identity damping the `I` in the force of infection is replaced by
/// `I / f(I)`. A damping that is not positive yields NaN derivatives, which
/// [`super::integrate`] reports as a blow-up.
pub fn sird_rhs(state: &SirdState, params: &SirdParams, t: f64) -> SirdState {
    let beta = params.beta.at(t);
    let force = params.damping.force(state.i).unwrap_or(f64::NAN);
    let infections = beta * force * state.s;
    let recoveries = params.delta * state.i;
    let deaths = params.gamma * state.i;
    SirdState {
        s: -infections,
        i: infections - recoveries - deaths,
        r: recoveries,
        d: deaths,
    }
}

impl OdeSystem for SirdParams {
    type State = SirdState;

    fn rhs(&self, state: &SirdState, t: f64) -> SirdState {
        sird_rhs(state, self, t)
    }
}

/// Alias used where a model value reads better than a parameter set.
pub type SirdModel = SirdParams;

#[derive(Debug, Error, PartialEq)]
#[error("R0 undefined: gamma + delta = {0}")]
pub struct R0Error(pub f64);

/// Reproduction number `β(t)·S(t) / (γ + δ)`.
pub fn r0(beta_t: f64, susceptible: f64, gamma: f64, delta: f64) -> Result<f64, R0Error> {
    let removal = gamma + delta;
    if !(removal > 0.0) {
        return Err(R0Error(removal));
    }
    Ok(beta_t * susceptible / removal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compartmental::State;
    use approx::assert_abs_diff_eq;

    fn params(beta: f64, gamma: f64, delta: f64) -> SirdParams {
        SirdParams::new(BetaSchedule::Constant(beta), gamma, delta)
    }

    #[test]
    fn disease_free_fixed_point() {
        let st = SirdState { s: 0.7, i: 0.0, r: 0.2, d: 0.1 };
        assert_eq!(sird_rhs(&st, &params(0.9, 0.3, 0.2), 0.0), SirdState::default());
    }

    #[test]
    fn pure_removal() {
        let st = SirdState { s: 5.0, i: 1.0, r: 0.0, d: 0.0 };
        let d = sird_rhs(&st, &params(0.0, 0.1, 0.2), 0.0);
        assert_abs_diff_eq!(d.i, -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(d.r, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.d, 0.1, epsilon = 1e-15);
        assert_eq!(d.s, 0.0);
    }

    #[test]
    fn pure_infection() {
        let st = SirdState { s: 0.9, i: 0.1, r: 0.0, d: 0.0 };
        let d = sird_rhs(&st, &params(0.5, 0.0, 0.0), 0.0);
        assert_abs_diff_eq!(d.s, -0.045, epsilon = 1e-15);
        assert_abs_diff_eq!(d.i, 0.045, epsilon = 1e-15);
        assert_eq!(d.total(), 0.0);
    }

    #[test]
    fn saturating_variant_reduces_force() {
        let st = SirdState { s: 1.0, i: 1.0, r: 0.0, d: 0.0 };
        let mut p = params(1.0, 0.0, 0.0);
        p.damping = Damping::Saturating { alpha: 1.0 };
        assert_abs_diff_eq!(sird_rhs(&st, &p, 0.0).s, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn r0_values() {
        assert_abs_diff_eq!(r0(0.3, 1.0, 0.1, 0.2).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(r0(0.0, 1.0, 0.1, 0.2).unwrap(), 0.0);
        assert_abs_diff_eq!(r0(0.6, 0.5, 0.1, 0.2).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(r0(0.5, 1.0, 0.0, 0.0), Err(R0Error(0.0)));
    }
}
