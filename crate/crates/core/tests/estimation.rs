//! Self-generated-data oracles for the sliding Gauss-Newton fit.

use chrono::NaiveDate;
use episcale::compartmental::{integrate, BetaSchedule, CharpParams, CharpState};
use episcale::estimation::{
    gauss_newton_solve, parameter_series, sliding_fit, susceptible_fraction, Bounds, FitConfig, FitWindow,
    FreeParam, ObservationSeries,
};

fn rates(beta: BetaSchedule, lambda1: f64) -> CharpParams {
    CharpParams {
        beta,
        lambda1,
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

const SEEDS: f64 = 1e-4;

fn observe(params: &CharpParams, days: usize) -> (ObservationSeries, Vec<CharpState>) {
    let init = CharpState { s: 1.0 - SEEDS, i_minus: SEEDS, ..Default::default() };
    let daily = integrate(params, init, 0.0, days as f64, 0.05).unwrap().sample_every(20);
    let values: Vec<[f64; 3]> = daily.iter().map(|s| [s.h, s.u, s.d]).collect();
    let obs = ObservationSeries::from_values(NaiveDate::from_ymd_opt(2020, 3, 17).unwrap(), &values).unwrap();
    (obs, daily)
}

fn config(params: &CharpParams, guess: [f64; 2]) -> FitConfig {
    let mut cfg = FitConfig::new(params.clone(), SEEDS);
    cfg.initial_guess = guess.to_vec();
    cfg
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn lockdown_step_is_recovered_per_plateau() {
    let step_day = 40;
    let truth = rates(BetaSchedule::piecewise(vec![(0.0, 0.4), (step_day as f64, 0.1)]).unwrap(), 0.1);
    let (obs, _) = observe(&truth, 90);
    let cfg = config(&truth, [0.25, 0.06]);
    let fits = sliding_fit(&obs, 14, &cfg).unwrap();
    assert_eq!(fits.len(), 90 + 1 - 14);

    for fit in fits.iter().map(|f| f.fitted().expect("window fitted")) {
        let w = fit.window;
        let expected_beta = if w.end() <= step_day {
            0.4
        } else if w.start >= step_day {
            0.1
        } else {
            continue;
        };
        assert!(rel(fit.alpha[0], expected_beta) < 0.05, "window {}: beta {}", w.start, fit.alpha[0]);
        assert!(rel(fit.alpha[1], 0.1) < 0.10, "window {}: lambda1 {}", w.start, fit.alpha[1]);
    }

    // the drop is located at the straddling windows
    let beta = parameter_series(&fits, &cfg, FreeParam::Beta);
    let before = beta.iter().filter(|(s, _)| s + 14 <= step_day).map(|p| p.1).fold(f64::INFINITY, f64::min);
    let after = beta.iter().filter(|(s, _)| *s >= step_day).map(|p| p.1).fold(0.0, f64::max);
    assert!(before > 3.0 * after);
}

#[test]
fn stationary_data_gives_stationary_estimates() {
    let truth = rates(BetaSchedule::Constant(0.3), 0.15);
    let (obs, _) = observe(&truth, 45);
    let fits = sliding_fit(&obs, 14, &config(&truth, [0.2, 0.2])).unwrap();
    let betas: Vec<f64> = fits.iter().map(|f| f.fitted().unwrap().alpha[0]).collect();
    for pair in betas.windows(2) {
        assert!(rel(pair[1], pair[0]) < 0.01);
    }
    for b in &betas {
        assert!(rel(*b, 0.3) < 0.01);
    }
}

#[test]
fn recovers_from_perturbed_starts() {
    let truth = rates(BetaSchedule::Constant(0.35), 0.12);
    let (obs, _) = observe(&truth, 30);
    let cfg = config(&truth, [0.35, 0.12]);
    let window = FitWindow::new(0, 14, obs.len()).unwrap();
    for (fb, fl) in [(0.5, 0.5), (1.5, 1.5), (0.5, 1.5), (1.5, 0.5), (1.2, 0.7)] {
        let init = [0.35 * fb, 0.12 * fl];
        let fit = gauss_newton_solve(window, &init, &obs, &cfg, cfg.first_state(&obs)).unwrap();
        assert!(fit.converged, "start {init:?}");
        assert!(rel(fit.alpha[0], 0.35) < 0.01 && rel(fit.alpha[1], 0.12) < 0.01, "start {init:?}: {:?}", fit.alpha);
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]), "monotone descent");
        assert!(fit.rss <= fit.initial_rss);
    }
}

#[test]
fn bounds_hold_exactly() {
    let truth = rates(BetaSchedule::Constant(0.35), 0.12);
    let (obs, _) = observe(&truth, 20);
    let mut cfg = config(&truth, [0.25, 0.05]);
    cfg.bounds = vec![Bounds::new(0.0, 0.3), Bounds::new(0.0, 0.08)];
    let fits = sliding_fit(&obs, 14, &cfg).unwrap();
    for f in fits.iter().filter_map(|f| f.fitted()) {
        assert!(f.alpha[0] <= 0.3 && f.alpha[0] >= 0.0);
        assert!(f.alpha[1] <= 0.08 && f.alpha[1] >= 0.0);
    }
}

#[test]
fn fits_are_bit_identical_across_calls() {
    let truth = rates(BetaSchedule::piecewise(vec![(0.0, 0.4), (20.0, 0.15)]).unwrap(), 0.1);
    let (obs, _) = observe(&truth, 40);
    let cfg = config(&truth, [0.3, 0.2]);
    let a = sliding_fit(&obs, 14, &cfg).unwrap();
    let b = sliding_fit(&obs, 14, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn susceptible_fraction_tracks_depletion() {
    // β = 0.336 leaves S(70) ≈ 0.70 (root-found offline with an adaptive solver)
    let truth = rates(BetaSchedule::Constant(0.336), 0.1);
    let (obs, daily) = observe(&truth, 70);
    let final_s = daily.last().unwrap().s;
    assert!((final_s - 0.70).abs() < 0.01, "generator consumed {:.3}", 1.0 - final_s);

    let fits = sliding_fit(&obs, 14, &config(&truth, [0.2, 0.15])).unwrap();
    let frac = susceptible_fraction(&fits, 1.0);
    assert_eq!(frac.len(), 71);
    assert!(frac.windows(2).all(|w| w[1] <= w[0]));
    assert!((frac[70] - final_s).abs() < 1e-3);
}
