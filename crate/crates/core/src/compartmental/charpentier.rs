use serde::{Deserialize, Serialize};

use super::{compartments, BetaSchedule, OdeSystem};

compartments! {
    /// Eight-compartment occupancies: susceptible, undetected and detected
    /// infected, undetected and detected recovered, hospitalised, intensive
    /// care, dead.
    CharpState, "charpentier" {
        s => "S",
        i_minus => "I-",
        i_plus => "I+",
        r_minus => "R-",
        r_plus => "R+",
        h => "H",
        u => "U",
        d => "D",
    }
}

/// Rates of the eight-compartment model, all per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharpParams {
    pub beta: BetaSchedule,
    /// Detection of infected by virological tests.
    pub lambda1: f64,
    /// Detection of recovered by serological tests.
    #[serde(default)]
    pub lambda2: f64,
    pub gamma_ih: f64,
    pub gamma_iu: f64,
    pub gamma_ir: f64,
    pub gamma_hr: f64,
    pub gamma_hu: f64,
    pub gamma_hd: f64,
    pub gamma_ur: f64,
    pub gamma_ud: f64,
}

impl Default for CharpParams {
    /// Zero rates with a zero transmission rate.
    fn default() -> Self {
        Self {
            beta: BetaSchedule::Constant(0.0),
            lambda1: 0.0,
            lambda2: 0.0,
            gamma_ih: 0.0,
            gamma_iu: 0.0,
            gamma_ir: 0.0,
            gamma_hr: 0.0,
            gamma_hu: 0.0,
            gamma_hd: 0.0,
            gamma_ur: 0.0,
            gamma_ud: 0.0,
        }
    }
}

impl CharpParams {
    pub fn rates(&self) -> [f64; 10] {
        [
            self.lambda1,
            self.lambda2,
            self.gamma_ih,
            self.gamma_iu,
            self.gamma_ir,
            self.gamma_hr,
            self.gamma_hu,
            self.gamma_hd,
            self.gamma_ur,
            self.gamma_ud,
        ]
    }
}

/// Right-hand side of the eight-compartment system.
///
/// Deaths are fed by intensive care and hospital occupancy,
/// `dD = γ_UD·U + γ_HD·H`, so every outflow is matched by an inflow and the
/// component sum is zero.
pub fn charp_rhs(state: &CharpState, p: &CharpParams, t: f64) -> CharpState {
    let beta = p.beta.at(t);
    let infections = beta * state.i_minus * state.s;
    let detection = p.lambda1 * state.i_minus;
    let sero = p.lambda2 * state.r_minus;

    let i_total = state.i_minus + state.i_plus;
    let to_h = p.gamma_ih * i_total;
    let to_u = p.gamma_iu * i_total;

    let h_to_u = p.gamma_hu * state.h;
    let h_to_d = p.gamma_hd * state.h;
    let h_to_r = p.gamma_hr * state.h;
    let u_to_r = p.gamma_ur * state.u;
    let u_to_d = p.gamma_ud * state.u;

    let i_out = p.gamma_ih + p.gamma_iu + p.gamma_ir;

    CharpState {
        s: -infections,
        i_minus: infections - detection - i_out * state.i_minus,
        i_plus: detection - i_out * state.i_plus,
        r_minus: p.gamma_ir * state.i_minus - sero,
        r_plus: p.gamma_ir * state.i_plus + h_to_r + u_to_r + sero,
        h: to_h - h_to_u - h_to_d - h_to_r,
        u: to_u + h_to_u - u_to_r - u_to_d,
        d: u_to_d + h_to_d,
    }
}

impl OdeSystem for CharpParams {
    type State = CharpState;

    fn rhs(&self, state: &CharpState, t: f64) -> CharpState {
        charp_rhs(state, self, t)
    }
}

pub type CharpModel = CharpParams;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compartmental::State;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_system_is_still() {
        let p = CharpParams {
            beta: BetaSchedule::Constant(0.5),
            lambda1: 0.3,
            gamma_ih: 0.1,
            gamma_hd: 0.2,
            ..CharpParams::default()
        };
        let st = CharpState { s: 100.0, ..CharpState::default() };
        assert_eq!(charp_rhs(&st, &p, 0.0), CharpState::default());
    }

    #[test]
    fn detection_only() {
        let p = CharpParams { lambda1: 1.0, ..CharpParams::default() };
        let st = CharpState { i_minus: 1.0, ..CharpState::default() };
        let d = charp_rhs(&st, &p, 0.0);
        assert_eq!(d, CharpState { i_minus: -1.0, i_plus: 1.0, ..CharpState::default() });
    }

    #[test]
    fn deaths_come_from_hospital_and_icu() {
        let p = CharpParams { gamma_hd: 0.1, gamma_ud: 0.2, ..CharpParams::default() };
        let st = CharpState { h: 10.0, u: 5.0, d: 1000.0, ..CharpState::default() };
        assert_abs_diff_eq!(charp_rhs(&st, &p, 0.0).d, 2.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn rhs_components_sum_to_zero(
            st in proptest::array::uniform8(0.0f64..1e4),
            rates in proptest::array::uniform10(0.0f64..2.0),
            beta in 0.0f64..1e-3,
        ) {
            let p = CharpParams {
                beta: BetaSchedule::Constant(beta),
                lambda1: rates[0], lambda2: rates[1], gamma_ih: rates[2], gamma_iu: rates[3],
                gamma_ir: rates[4], gamma_hr: rates[5], gamma_hu: rates[6], gamma_hd: rates[7],
                gamma_ur: rates[8], gamma_ud: rates[9],
            };
            let state = CharpState::from_fn(|i| st[i]);
            let d = charp_rhs(&state, &p, 0.0);
            let scale: f64 = d.components().iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            prop_assert!(d.total().abs() <= 1e-12 * scale);
        }
    }
}
