//! Effective transmission rate from daily susceptible and infected counts.

use serde::{Deserialize, Serialize};

use super::CouplingError;
use crate::compartmental::{integrate, BetaSchedule, SirdParams, SirdState, DEFAULT_DT};
use crate::estimation::{gauss_newton, Bounds, SolverOptions};

/// Quadrature of `∫ I·S dt` over one day in the inversion of `dS = −βIS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMethod {
    /// `β̂(t) = −ΔS / (I(t)·S(t))`; exact for daily Euler dynamics.
    LeftPoint,
    /// Average of `I·S` at both ends of the day; second-order accurate for
    /// smooth trajectories.
    #[default]
    Trapezoid,
}

/// Per-day estimates; entry `t` covers day `t → t+1`. `None` where the
/// inversion is undefined (no infected or no susceptibles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveBeta {
    pub beta: Vec<Option<f64>>,
    /// `β̂(t)·S(t)/(γ+δ)`.
    pub r0: Vec<Option<f64>>,
}

/// Invert the SIRD susceptible equation day by day, in fractions of
/// `population`. `smoothing` is the width of a centred moving average (1 or 0
/// for none).
pub fn effective_beta(
    susceptible: &[f64],
    infected: &[f64],
    population: f64,
    gamma_delta: f64,
    method: BetaMethod,
    smoothing: usize,
) -> Result<EffectiveBeta, CouplingError> {
    if susceptible.len() != infected.len() {
        return Err(CouplingError::Length(susceptible.len(), infected.len()));
    }
    if !(population > 0.0) {
        return Err(CouplingError::Config(format!("population must be positive, got {population}")));
    }
    if !(gamma_delta > 0.0) {
        return Err(CouplingError::Config(format!("gamma + delta must be positive, got {gamma_delta}")));
    }
    for (index, &value) in susceptible.iter().chain(infected).enumerate() {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(CouplingError::InvalidValue { index: index % susceptible.len(), value });
        }
    }
    let s: Vec<f64> = susceptible.iter().map(|v| v / population).collect();
    let i: Vec<f64> = infected.iter().map(|v| v / population).collect();
    let days = s.len().saturating_sub(1);
    let raw: Vec<Option<f64>> = (0..days)
        .map(|t| {
            if s[t] == 0.0 || i[t] == 0.0 {
                return None;
            }
            let exposure = match method {
                BetaMethod::LeftPoint => i[t] * s[t],
                BetaMethod::Trapezoid => 0.5 * (i[t] * s[t] + i[t + 1] * s[t + 1]),
            };
            Some(-(s[t + 1] - s[t]) / exposure)
        })
        .collect();
    let beta = moving_average(&raw, smoothing);
    let r0 = beta.iter().zip(&s).map(|(b, st)| b.map(|b| b * st / gamma_delta)).collect();
    Ok(EffectiveBeta { beta, r0 })
}

/// Centred moving average over available values; missing entries stay missing.
pub fn moving_average(values: &[Option<f64>], width: usize) -> Vec<Option<f64>> {
    if width <= 1 {
        return values.to_vec();
    }
    let half = width / 2;
    (0..values.len())
        .map(|t| {
            values[t]?;
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(values.len());
            let present: Vec<f64> = values[lo..hi].iter().flatten().copied().collect();
            Some(present.iter().sum::<f64>() / present.len() as f64)
        })
        .collect()
}

/// Fit a constant β on each sliding window by matching an integrated SIRD
/// trajectory to the observed S and I fractions.
///
/// This is the estimation-based alternative to the direct inversion. Windows
/// starting with no infected are `None`.
pub fn fit_beta_windows(
    susceptible: &[f64],
    infected: &[f64],
    population: f64,
    gamma_delta: f64,
    window: usize,
) -> Result<Vec<Option<f64>>, CouplingError> {
    if susceptible.len() != infected.len() {
        return Err(CouplingError::Length(susceptible.len(), infected.len()));
    }
    if window == 0 || window >= susceptible.len() {
        return Err(CouplingError::Config(format!(
            "window {window} must be positive and shorter than the {}-day series",
            susceptible.len()
        )));
    }
    let s: Vec<f64> = susceptible.iter().map(|v| v / population).collect();
    let i: Vec<f64> = infected.iter().map(|v| v / population).collect();
    let steps_per_day = (1.0 / DEFAULT_DT).round() as usize;
    let options = SolverOptions::default();
    let mut guess = 0.3;
    let mut out = Vec::new();
    for start in 0..s.len() - window {
        if i[start] == 0.0 || s[start] == 0.0 {
            out.push(None);
            continue;
        }
        let init = SirdState { s: s[start], i: i[start], r: 0.0, d: 0.0 };
        let problem = |alpha: &[f64]| {
            let params = SirdParams::new(BetaSchedule::Constant(alpha[0]), gamma_delta, 0.0);
            integrate(&params, init, 0.0, window as f64, DEFAULT_DT).map(|tr| {
                tr.sample_every(steps_per_day)
                    .iter()
                    .enumerate()
                    .flat_map(|(d, st)| [st.s - s[start + d], st.i - i[start + d]])
                    .collect::<Vec<f64>>()
            })
        };
        match gauss_newton(&problem, &[guess], &[Bounds::NON_NEGATIVE], &options) {
            Ok(outcome) => {
                guess = outcome.params[0].max(1e-6);
                out.push(Some(outcome.params[0]));
            }
            Err(_) => out.push(None),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_daily_data_is_inverted_exactly() {
        let (beta, gd) = (0.3, 0.1);
        let (mut s, mut i) = (0.99, 0.01);
        let (mut ss, mut is) = (vec![s], vec![i]);
        for _ in 0..30 {
            let inf = beta * i * s;
            s -= inf;
            i += inf - gd * i;
            ss.push(s);
            is.push(i);
        }
        let est = effective_beta(&ss, &is, 1.0, gd, BetaMethod::LeftPoint, 1).unwrap();
        for b in est.beta {
            assert!((b.unwrap() - beta).abs() < 1e-12);
        }
        assert!((est.r0[0].unwrap() - beta * 0.99 / gd).abs() < 1e-12);
    }

    #[test]
    fn no_new_infections_give_zero() {
        let est = effective_beta(&[50.0; 5], &[3.0; 5], 100.0, 0.1, BetaMethod::Trapezoid, 3).unwrap();
        assert!(est.beta.iter().all(|b| *b == Some(0.0)));
    }

    #[test]
    fn missing_where_undefined() {
        let est = effective_beta(&[10.0, 10.0, 9.0], &[0.0, 1.0, 1.0], 20.0, 0.1, BetaMethod::LeftPoint, 1).unwrap();
        assert_eq!(est.beta[0], None);
        assert!(est.beta[1].is_some());
    }

    #[test]
    fn r0_is_scale_free() {
        let s = [900.0, 880.0, 850.0];
        let i = [20.0, 30.0, 45.0];
        let a = effective_beta(&s, &i, 1000.0, 0.12, BetaMethod::Trapezoid, 1).unwrap();
        let s3: Vec<f64> = s.iter().map(|v| v * 3.0).collect();
        let i3: Vec<f64> = i.iter().map(|v| v * 3.0).collect();
        let b = effective_beta(&s3, &i3, 3000.0, 0.12, BetaMethod::Trapezoid, 1).unwrap();
        for (x, y) in a.r0.iter().zip(&b.r0) {
            assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_keeps_gaps() {
        let v = [Some(1.0), Some(3.0), None, Some(5.0)];
        assert_eq!(moving_average(&v, 3), vec![Some(2.0), Some(2.0), None, Some(5.0)]);
    }
}
