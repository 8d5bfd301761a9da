//! Sliding-horizon estimation of the transmission rate β and the detection
//! rate λ₁ from hospital (H), intensive care (U) and death (D) counts.
//!
//! Each window `[t, t+k]` is fitted by damped Gauss-Newton with a
//! finite-difference Jacobian. Windows overlap with stride one; each is
//! warm-started from its predecessor's estimate and starts from the fitted
//! state on its first day (see [`sliding_fit`]).

mod observations;
pub mod solver;

pub use observations::{Observation, ObservationSeries, SeriesError};
pub use solver::{gauss_newton, jacobian_fd, Bounds, LeastSquaresProblem, SolveOutcome, SolverOptions};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compartmental::{integrate, BetaSchedule, CharpParams, CharpState, OdeError, DEFAULT_DT};

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("window starting at {start} with length {length} does not fit a series of {len} days")]
    Window { start: usize, length: usize, len: usize },
    #[error("integration failed for parameters {alpha:?}: {source}")]
    Integration { alpha: Vec<f64>, source: OdeError },
}

/// A parameter slot the fit may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    /// β, held constant over the window.
    Beta,
    Lambda1,
    Lambda2,
    GammaIh,
    GammaIu,
    GammaIr,
    GammaHr,
    GammaHu,
    GammaHd,
    GammaUr,
    GammaUd,
}

impl FreeParam {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Beta => "beta",
            Self::Lambda1 => "lambda1",
            Self::Lambda2 => "lambda2",
            Self::GammaIh => "gamma_ih",
            Self::GammaIu => "gamma_iu",
            Self::GammaIr => "gamma_ir",
            Self::GammaHr => "gamma_hr",
            Self::GammaHu => "gamma_hu",
            Self::GammaHd => "gamma_hd",
            Self::GammaUr => "gamma_ur",
            Self::GammaUd => "gamma_ud",
        }
    }

    fn assign(&self, params: &mut CharpParams, value: f64) {
        match self {
            Self::Beta => params.beta = BetaSchedule::Constant(value),
            Self::Lambda1 => params.lambda1 = value,
            Self::Lambda2 => params.lambda2 = value,
            Self::GammaIh => params.gamma_ih = value,
            Self::GammaIu => params.gamma_iu = value,
            Self::GammaIr => params.gamma_ir = value,
            Self::GammaHr => params.gamma_hr = value,
            Self::GammaHu => params.gamma_hu = value,
            Self::GammaHd => params.gamma_hd = value,
            Self::GammaUr => params.gamma_ur = value,
            Self::GammaUd => params.gamma_ud = value,
        }
    }
}

/// `[start, start + length]` in day indices of the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitWindow {
    pub start: usize,
    pub length: usize,
}

impl FitWindow {
    pub fn new(start: usize, length: usize, series_len: usize) -> Result<Self, EstimationError> {
        if length < 2 || start + length >= series_len {
            return Err(EstimationError::Window { start, length, len: series_len });
        }
        Ok(Self { start, length })
    }

    /// Index of the last day covered.
    pub fn end(&self) -> usize {
        self.start + self.length
    }
}

fn default_free() -> Vec<FreeParam> {
    vec![FreeParam::Beta, FreeParam::Lambda1]
}
fn default_guess() -> Vec<f64> {
    vec![0.3, 0.1]
}
fn default_window() -> usize {
    14
}
fn default_max_iterations() -> usize {
    100
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_fd_step() -> f64 {
    1e-6
}
fn default_damping_floor() -> f64 {
    1e-12
}
fn default_weights() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}
fn default_population() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    DEFAULT_DT
}

/// Settings shared by every window of a sliding fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Fixed rates; the free slots are overwritten per window.
    pub base: CharpParams,
    #[serde(default = "default_free")]
    pub free: Vec<FreeParam>,
    /// Starting point of the first window, one value per free slot.
    #[serde(default = "default_guess")]
    pub initial_guess: Vec<f64>,
    /// Per-slot bounds; empty means `[0, ∞)` for every slot.
    #[serde(default)]
    pub bounds: Vec<Bounds>,
    #[serde(default = "default_population")]
    pub population: f64,
    /// Undetected infected at the start of the first window.
    pub seeds: f64,
    /// Overrides the first window's state built from `population` and `seeds`.
    #[serde(default)]
    pub initial_state: Option<CharpState>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_damping_floor")]
    pub damping_floor: f64,
    /// Multipliers applied to the H, U and D residuals.
    #[serde(default = "default_weights")]
    pub weights: [f64; 3],
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl FitConfig {
    pub fn new(base: CharpParams, seeds: f64) -> Self {
        Self {
            base,
            free: default_free(),
            initial_guess: default_guess(),
            bounds: Vec::new(),
            population: default_population(),
            seeds,
            initial_state: None,
            window: default_window(),
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            fd_step: default_fd_step(),
            damping_floor: default_damping_floor(),
            weights: default_weights(),
            dt: default_dt(),
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let fail = |m: String| Err(EstimationError::Config(m));
        if self.initial_guess.len() != self.free.len() {
            return fail(format!(
                "{} free parameters but {} initial values",
                self.free.len(),
                self.initial_guess.len()
            ));
        }
        if !self.bounds.is_empty() && self.bounds.len() != self.free.len() {
            return fail(format!("{} free parameters but {} bounds", self.free.len(), self.bounds.len()));
        }
        for (j, b) in self.bounds().iter().enumerate() {
            if !(b.lower >= 0.0) || !(b.lower <= b.upper) {
                return fail(format!("bounds of {} must satisfy 0 <= lower <= upper", self.free[j].name()));
            }
            if !b.contains(self.initial_guess[j]) {
                return fail(format!("initial value of {} lies outside its bounds", self.free[j].name()));
            }
        }
        if self.window < 2 {
            return fail("window length must be at least 2 days".into());
        }
        for (name, v) in [("tolerance", self.tolerance), ("fd_step", self.fd_step), ("dt", self.dt)] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(self.damping_floor >= 0.0) {
            return fail("damping_floor must be non-negative".into());
        }
        if !(self.population > 0.0) || !(self.seeds >= 0.0) || self.seeds > self.population {
            return fail("need population > 0 and 0 <= seeds <= population".into());
        }
        if self.base.rates().iter().any(|r| !(*r >= 0.0)) {
            return fail("all base rates must be non-negative".into());
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return fail("weights must be non-negative".into());
        }
        Ok(())
    }

    pub fn bounds(&self) -> Vec<Bounds> {
        if self.bounds.is_empty() {
            vec![Bounds::NON_NEGATIVE; self.free.len()]
        } else {
            self.bounds.clone()
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            fd_step: self.fd_step,
            damping_floor: self.damping_floor,
        }
    }

    /// Rates with `alpha` substituted into the free slots.
    pub fn params_with(&self, alpha: &[f64]) -> CharpParams {
        let mut p = self.base.clone();
        for (slot, &v) in self.free.iter().zip(alpha) {
            slot.assign(&mut p, v);
        }
        p
    }

    /// State of the first window: `S = N − seeds − H₀ − U₀ − D₀`, `I⁻ = seeds`,
    /// and the observed hospital counts of day 0.
    pub fn first_state(&self, obs: &ObservationSeries) -> CharpState {
        if let Some(s) = self.initial_state {
            return s;
        }
        let first = obs.rows()[0];
        CharpState {
            s: self.population - self.seeds - first.h - first.u - first.d,
            i_minus: self.seeds,
            h: first.h,
            u: first.u,
            d: first.d,
            ..CharpState::default()
        }
    }

    fn steps_per_day(&self) -> usize {
        (1.0 / self.dt).round().max(1.0) as usize
    }
}

/// Daily model states over a window, `k + 1` of them.
pub fn simulate_window(
    alpha: &[f64],
    window: FitWindow,
    cfg: &FitConfig,
    init: CharpState,
) -> Result<Vec<CharpState>, EstimationError> {
    let params = cfg.params_with(alpha);
    let per_day = cfg.steps_per_day();
    let t0 = window.start as f64;
    let traj = integrate(&params, init, t0, t0 + window.length as f64, 1.0 / per_day as f64)
        .map_err(|source| EstimationError::Integration { alpha: alpha.to_vec(), source })?;
    Ok(traj.sample_every(per_day))
}

/// `Z_fit(i, α) − Z_obs(i)` for `i` in the window, laid out `[H, U, D]` per day.
pub fn residuals(
    alpha: &[f64],
    window: FitWindow,
    obs: &ObservationSeries,
    cfg: &FitConfig,
    init: CharpState,
) -> Result<Vec<f64>, EstimationError> {
    if window.end() >= obs.len() {
        return Err(EstimationError::Window { start: window.start, length: window.length, len: obs.len() });
    }
    let states = simulate_window(alpha, window, cfg, init)?;
    let [wh, wu, wd] = cfg.weights;
    let mut out = Vec::with_capacity(3 * states.len());
    for (st, row) in states.iter().zip(&obs.rows()[window.start..=window.end()]) {
        out.push(wh * (st.h - row.h));
        out.push(wu * (st.u - row.u));
        out.push(wd * (st.d - row.d));
    }
    Ok(out)
}

/// The least-squares problem of a single window.
pub struct WindowProblem<'a> {
    pub window: FitWindow,
    pub obs: &'a ObservationSeries,
    pub cfg: &'a FitConfig,
    pub init: CharpState,
}

impl LeastSquaresProblem for WindowProblem<'_> {
    type Error = EstimationError;

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>, EstimationError> {
        residuals(params, self.window, self.obs, self.cfg, self.init)
    }
}

/// Finite-difference Jacobian of [`residuals`] at `alpha`.
pub fn window_jacobian(
    alpha: &[f64],
    window: FitWindow,
    obs: &ObservationSeries,
    cfg: &FitConfig,
    init: CharpState,
) -> Result<DMatrix<f64>, EstimationError> {
    let problem = WindowProblem { window, obs, cfg, init };
    let base = problem.residuals(alpha)?;
    jacobian_fd(&problem, alpha, &base, &cfg.bounds(), cfg.fd_step)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub window: FitWindow,
    pub alpha: Vec<f64>,
    pub rss: f64,
    pub initial_rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted residual sums of squares, starting at the initial guess.
    pub history: Vec<f64>,
    /// Fitted daily states over the window.
    pub states: Vec<CharpState>,
}

/// Fit one window from `init_alpha`.
pub fn gauss_newton_solve(
    window: FitWindow,
    init_alpha: &[f64],
    obs: &ObservationSeries,
    cfg: &FitConfig,
    init: CharpState,
) -> Result<FitResult, EstimationError> {
    let problem = WindowProblem { window, obs, cfg, init };
    let outcome = gauss_newton(&problem, init_alpha, &cfg.bounds(), &cfg.solver_options())?;
    let states = simulate_window(&outcome.params, window, cfg, init)?;
    Ok(FitResult {
        window,
        alpha: outcome.params,
        rss: outcome.rss,
        initial_rss: outcome.initial_rss,
        iterations: outcome.iterations,
        converged: outcome.converged,
        history: outcome.history,
        states,
    })
}

/// Outcome of one window of a sliding fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WindowFit {
    Fitted(FitResult),
    Failed { window: FitWindow, message: String },
}

impl WindowFit {
    pub fn window(&self) -> FitWindow {
        match self {
            Self::Fitted(f) => f.window,
            Self::Failed { window, .. } => *window,
        }
    }

    pub fn fitted(&self) -> Option<&FitResult> {
        match self {
            Self::Fitted(f) => Some(f),
            Self::Failed { .. } => None,
        }
    }
}

/// Fit every window `[t, t+k]`, `t = 0 … len−k−1`.
///
/// Window `t` is warm-started from window `t−1`'s estimate. Its initial state is
/// the fitted state at day `t`, obtained by advancing the fitted trajectory one
/// day at a time: the step from day `d` to `d+1` uses the estimate of the
/// best-fitting window (smallest RSS relative to the observed signal) among
/// the already fitted windows that span `[d, d+1]`. Away from parameter
/// changes every spanning window fits equally well and this is the previous
/// window's trajectory; across a change the windows that straddle it fit
/// poorly and are not allowed to carry their compromise into the hidden
/// compartments.
///
/// A failed window is recorded and skipped.
pub fn sliding_fit(obs: &ObservationSeries, k: usize, cfg: &FitConfig) -> Result<Vec<WindowFit>, EstimationError> {
    cfg.validate()?;
    if k < 2 || obs.len() < k + 1 {
        return Err(EstimationError::Window { start: 0, length: k, len: obs.len() });
    }
    let n_windows = obs.len() - k;
    let mut alpha = cfg.initial_guess.clone();
    let mut state = cfg.first_state(obs);
    let mut out: Vec<WindowFit> = Vec::with_capacity(n_windows);
    // relative RSS of each window, None when it failed
    let mut quality: Vec<Option<f64>> = Vec::with_capacity(n_windows);
    for start in 0..n_windows {
        let window = FitWindow { start, length: k };
        match gauss_newton_solve(window, &alpha, obs, cfg, state) {
            Ok(fit) => {
                alpha.clone_from(&fit.alpha);
                quality.push(Some(fit.rss / signal_energy(obs, window, cfg)));
                out.push(WindowFit::Fitted(fit));
            }
            Err(e) => {
                quality.push(None);
                out.push(WindowFit::Failed { window, message: e.to_string() });
            }
        }
        if start + 1 == n_windows {
            break;
        }
        // windows spanning [start, start+1]
        let first = (start + 1).saturating_sub(k);
        let best = (first..=start)
            .filter_map(|s| quality[s].map(|q| (s, q)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(s, _)| s);
        let step_alpha = match best.and_then(|s| out[s].fitted()) {
            Some(f) => f.alpha.clone(),
            None => alpha.clone(),
        };
        let one_day = FitWindow { start, length: 1 };
        match simulate_window(&step_alpha, one_day, cfg, state) {
            Ok(states) => state = states[1],
            Err(_) => {
                if let Ok(states) = simulate_window(&alpha, one_day, cfg, state) {
                    state = states[1];
                }
            }
        }
    }
    Ok(out)
}

fn signal_energy(obs: &ObservationSeries, window: FitWindow, cfg: &FitConfig) -> f64 {
    let [wh, wu, wd] = cfg.weights;
    let e: f64 = obs.rows()[window.start..=window.end()]
        .iter()
        .map(|r| (wh * r.h).powi(2) + (wu * r.u).powi(2) + (wd * r.d).powi(2))
        .sum();
    if e > 0.0 {
        e
    } else {
        1.0
    }
}

/// Fitted daily states: each window's first day, then the whole last window.
pub fn fitted_daily_states(fits: &[WindowFit]) -> Vec<CharpState> {
    let good: Vec<&FitResult> = fits.iter().filter_map(WindowFit::fitted).collect();
    let Some(last) = good.last() else {
        return Vec::new();
    };
    let mut out: Vec<CharpState> = good[..good.len() - 1].iter().map(|f| f.states[0]).collect();
    out.extend_from_slice(&last.states);
    out
}

/// `S(t) / N` along the fitted trajectory.
pub fn susceptible_fraction(fits: &[WindowFit], population: f64) -> Vec<f64> {
    fitted_daily_states(fits).iter().map(|s| s.s / population).collect()
}

/// `(window start, value)` of one free parameter across the fitted windows.
pub fn parameter_series(fits: &[WindowFit], cfg: &FitConfig, param: FreeParam) -> Vec<(usize, f64)> {
    let Some(slot) = cfg.free.iter().position(|p| *p == param) else {
        return Vec::new();
    };
    fits.iter()
        .filter_map(WindowFit::fitted)
        .map(|f| (f.window.start, f.alpha[slot]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn rates() -> CharpParams {
        CharpParams {
            beta: BetaSchedule::Constant(0.3),
            lambda1: 0.1,
            lambda2: 0.0,
            gamma_ih: 0.02,
            gamma_iu: 0.005,
            gamma_ir: 0.1,
            gamma_hr: 0.08,
            gamma_hu: 0.02,
            gamma_hd: 0.01,
            gamma_ur: 0.05,
            gamma_ud: 0.03,
        }
    }

    fn synthetic(days: usize, params: &CharpParams, cfg: &FitConfig) -> ObservationSeries {
        let init = CharpState { s: cfg.population - cfg.seeds, i_minus: cfg.seeds, ..Default::default() };
        let traj = integrate(params, init, 0.0, days as f64, 0.05).unwrap();
        let values: Vec<[f64; 3]> = traj.sample_every(20).iter().map(|s| [s.h, s.u, s.d]).collect();
        ObservationSeries::from_values(NaiveDate::from_ymd_opt(2020, 3, 17).unwrap(), &values).unwrap()
    }

    fn config() -> FitConfig {
        let mut cfg = FitConfig::new(rates(), 1e-3);
        cfg.window = 14;
        cfg
    }

    #[test]
    fn residual_dimension() {
        let cfg = config();
        let obs = synthetic(10, &rates(), &cfg);
        let w = FitWindow::new(0, 2, obs.len()).unwrap();
        let r = residuals(&[0.3, 0.1], w, &obs, &cfg, cfg.first_state(&obs)).unwrap();
        assert_eq!(r.len(), 9);
    }

    #[test]
    fn self_consistent_residual_vanishes() {
        let cfg = config();
        let obs = synthetic(20, &rates(), &cfg);
        let w = FitWindow::new(0, 14, obs.len()).unwrap();
        let r = residuals(&[0.3, 0.1], w, &obs, &cfg, cfg.first_state(&obs)).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-6));
    }

    #[test]
    fn zero_beta_undershoots_growing_hospital_load() {
        let cfg = config();
        let obs = synthetic(20, &rates(), &cfg);
        let w = FitWindow::new(0, 14, obs.len()).unwrap();
        let r = residuals(&[0.0, 0.1], w, &obs, &cfg, cfg.first_state(&obs)).unwrap();
        // H residuals after day 0 are negative
        for day in 1..=14 {
            assert!(r[3 * day] < 0.0, "day {day}: {}", r[3 * day]);
        }
    }

    #[test]
    fn window_validation() {
        assert!(FitWindow::new(0, 1, 10).is_err());
        assert!(FitWindow::new(5, 5, 10).is_err());
        assert!(FitWindow::new(4, 5, 10).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = config();
        cfg.initial_guess = vec![0.1];
        assert!(cfg.validate().is_err());
        let mut cfg = config();
        cfg.bounds = vec![Bounds::new(0.5, 1.0), Bounds::NON_NEGATIVE];
        assert!(cfg.validate().is_err(), "guess 0.3 outside [0.5, 1]");
        let mut cfg = config();
        cfg.tolerance = 0.0;
        assert!(cfg.validate().is_err());
        assert!(config().validate().is_ok());
    }

    #[test]
    fn start_at_generating_parameters() {
        let cfg = config();
        let obs = synthetic(20, &rates(), &cfg);
        let w = FitWindow::new(0, 14, obs.len()).unwrap();
        let fit = gauss_newton_solve(w, &[0.3, 0.1], &obs, &cfg, cfg.first_state(&obs)).unwrap();
        assert!(fit.converged);
        assert!(fit.rss <= fit.initial_rss);
        assert!((fit.alpha[0] - 0.3).abs() < 1e-6 && (fit.alpha[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn single_window_for_minimal_series() {
        let cfg = config();
        let obs = synthetic(14, &rates(), &cfg);
        let fits = sliding_fit(&obs, 14, &cfg).unwrap();
        assert_eq!(fits.len(), 1);
    }

    #[test]
    fn no_infection_keeps_everyone_susceptible() {
        let mut cfg = config();
        cfg.seeds = 0.0;
        let obs = synthetic(20, &rates(), &cfg);
        let fits = sliding_fit(&obs, 14, &cfg).unwrap();
        let frac = susceptible_fraction(&fits, cfg.population);
        assert_eq!(frac.len(), 21);
        assert!(frac.iter().all(|&f| f == 1.0));
    }
}
