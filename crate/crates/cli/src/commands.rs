use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use chrono::{Days, NaiveDate};
use episcale::compartmental::{integrate, CharpState, SirdState, State, Trajectory};
use episcale::coupling::{
    calibrate, effective_beta, project_target, replicate_run, switch_ensemble, CalibrationResult, SwitchReplicate,
    TargetCurve,
};
use episcale::estimation::{fitted_daily_states, sliding_fit, FitConfig, ObservationSeries, WindowFit};
use episcale::io::{
    load_buildings, load_observations, load_target, write_counts_csv, write_svg_chart, write_table,
    write_target_csv, ChartSeries, ExperimentConfig, ModelKind, Table,
};
use episcale::rng::replicate_seed;
use episcale::town::{generate_population, run, synthetic_layout, Building, Counts, TownTrajectory, World};
use serde_json::json;

use crate::output::Output;
use crate::{Classify, Command, Common, Failure};

pub fn dispatch(command: Command, args: &[String]) -> Result<(), Failure> {
    let (name, common) = match &command {
        Command::Fit { common, .. } => ("fit", common),
        Command::SimulateOde { common, .. } => ("simulate-ode", common),
        Command::SimulateTown { common, .. } => ("simulate-town", common),
        Command::Replicates { common, .. } => ("replicates", common),
        Command::Calibrate { common, .. } => ("calibrate", common),
        Command::Scenario { common, .. } => ("scenario", common),
        Command::Pipeline { common, .. } => ("pipeline", common),
    };
    let common = common.clone();
    let mut cfg = load_config(&common)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = common.jobs {
            if j == 0 {
                return Err(Failure::Invalid(anyhow!("--jobs must be at least 1")));
            }
            b = b.num_threads(j);
        }
        b.build().runtime()?
    };
    pool.install(|| {
        let out = match command {
            Command::Fit { observations, .. } => {
                set_path(&mut cfg.io.observations, observations)?;
                fit(&cfg, &common.out)?
            }
            Command::SimulateOde { days, .. } => simulate_ode(&cfg, days, &common.out)?,
            Command::SimulateTown { buildings, days, agents, .. } => {
                set_path(&mut cfg.io.buildings, buildings)?;
                simulate_town(&cfg, days, agents, &common.out)?
            }
            Command::Replicates { buildings, n, days, .. } => {
                set_path(&mut cfg.io.buildings, buildings)?;
                replicates(&cfg, n, days, &common.out)?
            }
            Command::Calibrate { buildings, target, replicates, .. } => {
                set_path(&mut cfg.io.buildings, buildings)?;
                set_path(&mut cfg.io.target, target)?;
                calibrate_cmd(&cfg, replicates, &common.out)?
            }
            Command::Scenario { buildings, switch_date, extra_days, n, .. } => {
                set_path(&mut cfg.io.buildings, buildings)?;
                scenario(&cfg, switch_date, extra_days, n, &common.out)?
            }
            Command::Pipeline { observations, buildings, replicates, .. } => {
                set_path(&mut cfg.io.observations, observations)?;
                set_path(&mut cfg.io.buildings, buildings)?;
                pipeline(&cfg, replicates, &common.out)?
            }
        };
        out.finish(name, args, common.jobs, &cfg)
    })
}

fn absolute(p: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(p).with_context(|| format!("cannot resolve {}", p.display())).invalid()
}

fn set_path(slot: &mut Option<PathBuf>, flag: Option<PathBuf>) -> Result<(), Failure> {
    if let Some(p) = flag {
        *slot = Some(p);
    }
    if let Some(p) = slot {
        *slot = Some(absolute(p)?);
    }
    Ok(())
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).invalid()?,
        None => ExperimentConfig::parse("{}", Path::new("<defaults>")).invalid()?,
    };
    for p in [&mut cfg.io.observations, &mut cfg.io.buildings, &mut cfg.io.target] {
        set_path(p, None)?;
    }
    if let Some(seed) = common.seed {
        cfg.seeds.dynamics = seed;
    }
    Ok(cfg)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn date_at(start: NaiveDate, day: usize) -> String {
    start.checked_add_days(Days::new(day as u64)).map(|d| d.to_string()).unwrap_or_default()
}

// ---- inputs ----

fn observations(cfg: &ExperimentConfig) -> Result<ObservationSeries, Failure> {
    let path = cfg
        .io
        .observations
        .as_ref()
        .ok_or_else(|| Failure::Invalid(anyhow!("no observations: pass --observations or set io.observations")))?;
    load_observations(path).invalid()
}

fn buildings(cfg: &ExperimentConfig) -> Result<Arc<[Building]>, Failure> {
    let list = match &cfg.io.buildings {
        Some(path) => load_buildings(path).invalid()?,
        None => synthetic_layout(&cfg.town.layout, cfg.seeds.layout),
    };
    // surfaces missing categories before anything is written
    generate_population(&list, &cfg.town.population, cfg.seeds.population).invalid()?;
    Ok(list.into())
}

fn fit_setup(cfg: &ExperimentConfig) -> Result<(ObservationSeries, FitConfig), Failure> {
    let obs = observations(cfg)?;
    let fit_cfg = cfg.estimation.fit_config(cfg.compartmental.charpentier.clone());
    if obs.len() < fit_cfg.window + 1 {
        return Err(Failure::Invalid(anyhow!(
            "{} observation days cannot fill one {}-day window",
            obs.len(),
            fit_cfg.window
        )));
    }
    Ok((obs.scaled(cfg.estimation.population), fit_cfg))
}

/// Drop target days before the town start; the target may not start later.
fn align_target(target: TargetCurve, start: NaiveDate, need: usize) -> Result<TargetCurve, Failure> {
    let offset = match target.start {
        Some(d) if d > start => {
            return Err(Failure::Invalid(anyhow!("target starts on {d}, after the town start date {start}")))
        }
        Some(d) => (start - d).num_days() as usize,
        None => 0,
    };
    let values: Vec<f64> = target.values.iter().skip(offset).copied().collect();
    if values.len() < need {
        return Err(Failure::Invalid(anyhow!(
            "target covers {} days from {start}, calibration needs {need}",
            values.len()
        )));
    }
    Ok(TargetCurve { start: Some(start), values })
}

// ---- fit ----

fn write_fit(out: &mut Output, fits: &[WindowFit], fit_cfg: &FitConfig, obs: &ObservationSeries) -> Result<(), Failure> {
    let mut header = vec!["window_start", "start_date", "end_date"];
    header.extend(fit_cfg.free.iter().map(|p| p.name()));
    header.extend(["rss", "initial_rss", "iterations", "converged", "status"]);
    let mut t = Table::new(&header);
    for f in fits {
        let w = f.window();
        let mut row = vec![w.start.to_string(), obs.date(w.start).to_string(), obs.date(w.end()).to_string()];
        match f {
            WindowFit::Fitted(r) => {
                row.extend(r.alpha.iter().map(|v| fmt(*v)));
                row.extend([fmt(r.rss), fmt(r.initial_rss), r.iterations.to_string(), r.converged.to_string()]);
                row.push("ok".into());
            }
            WindowFit::Failed { message, .. } => {
                row.extend(fit_cfg.free.iter().map(|_| String::new()));
                row.extend([String::new(), String::new(), String::new(), "false".into()]);
                row.push(format!("failed: {message}"));
            }
        }
        t.push(row);
    }
    write_table(&out.file("fit_windows.csv"), &t).runtime()?;

    let states = fitted_daily_states(fits);
    let mut s = Table::new(&["date", "S_fraction", "I_minus", "I_plus", "H_model", "U_model", "D_model"]);
    for (day, st) in states.iter().enumerate() {
        s.push(vec![
            date_at(obs.start_date(), day),
            fmt(st.s / fit_cfg.population),
            fmt(st.i_minus),
            fmt(st.i_plus),
            fmt(st.h),
            fmt(st.u),
            fmt(st.d),
        ]);
    }
    write_table(&out.file("susceptible.csv"), &s).runtime()?;

    let series: Vec<ChartSeries> = fit_cfg
        .free
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let pts = fits.iter().filter_map(|f| f.fitted()).map(|r| (r.window.start as f64, r.alpha[j])).collect();
            ChartSeries::new(p.name(), pts)
        })
        .collect();
    write_svg_chart(&out.file("fit_parameters.svg"), "Sliding-window estimates", "window start (day)", "rate", &series)
        .runtime()
}

fn run_fit(obs: &ObservationSeries, fit_cfg: &FitConfig) -> Result<Vec<WindowFit>, Failure> {
    let fits = sliding_fit(obs, fit_cfg.window, fit_cfg).runtime()?;
    if fits.iter().all(|f| f.fitted().is_none()) {
        return Err(Failure::Runtime(anyhow!("every window failed to fit")));
    }
    Ok(fits)
}

fn fit(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Output, Failure> {
    let (obs, fit_cfg) = fit_setup(cfg)?;
    let fits = run_fit(&obs, &fit_cfg)?;
    let mut out = Output::create(out_dir)?;
    write_fit(&mut out, &fits, &fit_cfg, &obs)?;
    Ok(out)
}

// ---- simulate-ode ----

fn write_trajectory<S: State>(out: &mut Output, tr: &Trajectory<S>, dt: f64) -> Result<(), Failure> {
    let stride = (1.0 / dt).round().max(1.0) as usize;
    let mut header = vec!["t"];
    header.extend(S::LABELS);
    let mut t = Table::new(&header);
    let mut series: Vec<ChartSeries> = S::LABELS.iter().map(|l| ChartSeries::new(*l, Vec::new())).collect();
    for (k, st) in tr.states.iter().enumerate().step_by(stride) {
        let time = tr.time(k);
        let mut row = vec![fmt(time)];
        for (i, s) in series.iter_mut().enumerate() {
            row.push(fmt(st.component(i)));
            s.points.push((time, st.component(i)));
        }
        t.push(row);
    }
    write_table(&out.file("trajectory.csv"), &t).runtime()?;
    write_svg_chart(&out.file("trajectory.svg"), S::MODEL, "day", "occupancy", &series).runtime()
}

fn simulate_ode(cfg: &ExperimentConfig, days: Option<f64>, out_dir: &Path) -> Result<Output, Failure> {
    let c = &cfg.compartmental;
    let days = days.unwrap_or(c.days);
    if !(days >= 0.0 && days.is_finite()) {
        return Err(Failure::Invalid(anyhow!("--days must be non-negative")));
    }
    let (n, i0) = (c.population, c.initial_infected);
    match c.model {
        ModelKind::Sird => {
            let init = SirdState { s: n - i0, i: i0, r: 0.0, d: 0.0 };
            let tr = integrate(&c.sird, init, 0.0, days, c.dt).runtime()?;
            let mut out = Output::create(out_dir)?;
            write_trajectory(&mut out, &tr, c.dt)?;
            Ok(out)
        }
        ModelKind::Charpentier => {
            let init = CharpState { s: n - i0, i_minus: i0, ..CharpState::default() };
            let tr = integrate(&c.charpentier, init, 0.0, days, c.dt).runtime()?;
            let mut out = Output::create(out_dir)?;
            write_trajectory(&mut out, &tr, c.dt)?;
            Ok(out)
        }
    }
}

// ---- town ----

fn counts_chart(out: &mut Output, name: &str, counts: &[Counts]) -> Result<(), Failure> {
    let day = |k: usize| k as f64;
    let series = vec![
        ChartSeries::new("S", counts.iter().enumerate().map(|(k, c)| (day(k), c.susceptible as f64)).collect()),
        ChartSeries::new("Ia", counts.iter().enumerate().map(|(k, c)| (day(k), c.asymptomatic as f64)).collect()),
        ChartSeries::new("Is", counts.iter().enumerate().map(|(k, c)| (day(k), c.symptomatic as f64)).collect()),
        ChartSeries::new("R", counts.iter().enumerate().map(|(k, c)| (day(k), c.recovered as f64)).collect()),
    ];
    write_svg_chart(&out.file(name), "Town aggregates", "day", "residents", &series).runtime()
}

/// Run `world` for `days`, applying the timeline's later policies on their days.
fn run_timeline(cfg: &ExperimentConfig, mut world: World, days: u32) -> Result<TownTrajectory, Failure> {
    let mut counts = vec![*world.log().last().expect("initial sample")];
    let mut day = 0;
    for (switch_day, policy) in cfg.phases().into_iter().skip(1).chain([(days, world.policy().clone())]) {
        let until = switch_day.min(days);
        if until > day {
            let tr = run(world, until - day);
            counts.extend_from_slice(&tr.counts[1..]);
            world = tr.world;
            day = until;
        }
        if switch_day < days {
            world.apply_policy(policy).runtime()?;
        }
    }
    Ok(TownTrajectory { counts, world })
}

fn simulate_town(cfg: &ExperimentConfig, days: Option<u32>, agents: bool, out_dir: &Path) -> Result<Output, Failure> {
    let days = days.unwrap_or(cfg.town.days);
    let b = buildings(cfg)?;
    let scenario = cfg.town_scenario(b, days);
    let world = scenario.world(replicate_seed(cfg.seeds.dynamics, 0, 0)).invalid()?;
    let tr = run_timeline(cfg, world, days)?;
    let mut out = Output::create(out_dir)?;
    write_counts_csv(&out.file("aggregates.csv"), &tr.counts, 1).runtime()?;
    let daily = tr.daily();
    let mut t = Table::new(&["day", "date", "S", "Ia", "Is", "R", "infected"]);
    for (d, c) in daily.iter().enumerate() {
        t.push(vec![
            d.to_string(),
            date_at(cfg.town.start_date, d),
            c.susceptible.to_string(),
            c.asymptomatic.to_string(),
            c.symptomatic.to_string(),
            c.recovered.to_string(),
            c.infected().to_string(),
        ]);
    }
    write_table(&out.file("daily.csv"), &t).runtime()?;
    counts_chart(&mut out, "town.svg", &daily)?;
    if agents {
        let mut a = Table::new(&["id", "age_group", "home", "workplace", "compliant", "health", "infection_clock"]);
        for r in tr.world.residents() {
            a.push(vec![
                r.id.to_string(),
                r.age_group.as_str().into(),
                r.home.to_string(),
                r.workplace.map(|w| w.to_string()).unwrap_or_default(),
                r.compliant.to_string(),
                r.health.as_str().into(),
                r.infection_clock.to_string(),
            ]);
        }
        write_table(&out.file("agents.csv"), &a).runtime()?;
    }
    Ok(out)
}

fn replicates(cfg: &ExperimentConfig, n: Option<usize>, days: Option<u32>, out_dir: &Path) -> Result<Output, Failure> {
    let n = n.unwrap_or(cfg.coupling.replicates);
    if n == 0 {
        return Err(Failure::Invalid(anyhow!("--n must be at least 1")));
    }
    let days = days.unwrap_or_else(|| cfg.calibration_days());
    let scenario = cfg.town_scenario(buildings(cfg)?, days);
    let stats = replicate_run(&scenario, n, cfg.seeds.dynamics, 0).runtime()?;
    let mut out = Output::create(out_dir)?;
    let mut t = Table::new(&["day", "date", "mean_infected", "std_infected"]);
    for (d, (m, s)) in stats.daily_mean().iter().zip(stats.daily_std()).enumerate() {
        t.push(vec![d.to_string(), date_at(cfg.town.start_date, d), fmt(*m), fmt(s)]);
    }
    write_table(&out.file("replicate_stats.csv"), &t).runtime()?;
    let mut r = Table::new(&["n", "seed", "final_size", "running_mean"]);
    for (k, ((seed, size), m)) in stats.seeds.iter().zip(&stats.final_sizes).zip(&stats.running_mean).enumerate() {
        r.push(vec![(k + 1).to_string(), seed.to_string(), fmt(*size), fmt(*m)]);
    }
    write_table(&out.file("running_mean.csv"), &r).runtime()?;
    let pts = stats.running_mean.iter().enumerate().map(|(k, m)| ((k + 1) as f64, *m)).collect();
    write_svg_chart(
        &out.file("convergence.svg"),
        "Convergence of the mean",
        "replicates",
        "mean final size",
        &[ChartSeries::new("running mean", pts)],
    )
    .runtime()?;
    Ok(out)
}

// ---- calibration and scenarios ----

fn write_calibration(out: &mut Output, result: &CalibrationResult, target: &TargetCurve) -> Result<(), Failure> {
    let mut header = vec!["cell"];
    header.extend(result.params.iter().map(|p| p.name()));
    header.push("distance");
    let mut t = Table::new(&header);
    for c in &result.cells {
        let mut row = vec![c.index.to_string()];
        row.extend(c.values.iter().map(|v| fmt(*v)));
        row.push(fmt(c.distance));
        t.push(row);
    }
    write_table(&out.file("calibration.csv"), &t).runtime()?;
    let best = result.best_cell();
    let params: serde_json::Map<String, serde_json::Value> =
        result.params.iter().zip(&best.values).map(|(p, v)| (p.name().to_string(), json!(v))).collect();
    let doc = json!({
        "cell": best.index,
        "params": params,
        "distance": best.distance,
        "replicates": result.replicates,
        "seed_base": result.seed_base,
        "metric": result.metric,
        "cells": result.cells.len(),
    });
    std::fs::write(out.file("best.json"), serde_json::to_string_pretty(&doc).runtime()? + "\n").runtime()?;
    let series = vec![
        ChartSeries::indexed("target", target.values.iter().map(|v| Some(*v))),
        ChartSeries::indexed("best cell mean", best.daily_mean.iter().map(|v| Some(*v))),
    ];
    write_svg_chart(&out.file("calibration.svg"), "Calibration", "day", "infected", &series).runtime()
}

fn calibrate_cmd(cfg: &ExperimentConfig, replicates: Option<usize>, out_dir: &Path) -> Result<Output, Failure> {
    let replicates = replicates.unwrap_or(cfg.coupling.replicates);
    if replicates == 0 {
        return Err(Failure::Invalid(anyhow!("--replicates must be at least 1")));
    }
    let path = cfg
        .io
        .target
        .as_ref()
        .ok_or_else(|| Failure::Invalid(anyhow!("no target: pass --target or set io.target")))?;
    let days = cfg.calibration_days();
    let target = align_target(load_target(path).invalid()?, cfg.town.start_date, days as usize + 1)?;
    let base = cfg.town_scenario(buildings(cfg)?, days);
    let result =
        calibrate(&cfg.coupling.grid, &target, replicates, cfg.seeds.dynamics, &base, cfg.coupling.metric).runtime()?;
    let mut out = Output::create(out_dir)?;
    write_calibration(&mut out, &result, &target)?;
    Ok(out)
}

fn mean_of(reps: &[SwitchReplicate], pick: impl Fn(&SwitchReplicate) -> &[Counts], f: impl Fn(&Counts) -> f64) -> Vec<f64> {
    let len = reps.iter().map(|r| pick(r).len()).min().unwrap_or(0);
    (0..len).map(|d| reps.iter().map(|r| f(&pick(r)[d])).sum::<f64>() / reps.len() as f64).collect()
}

fn write_scenario(
    out: &mut Output,
    cfg: &ExperimentConfig,
    reps: &[SwitchReplicate],
    switch_day: usize,
) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let infected = |c: &Counts| c.infected() as f64;
    let susceptible = |c: &Counts| c.susceptible as f64;
    let before = mean_of(reps, |r| &r.before, infected);
    let kept = mean_of(reps, |r| &r.kept, infected);
    let switched = mean_of(reps, |r| &r.switched, infected);
    let mut t = Table::new(&["day", "date", "phase", "kept_mean_infected", "switched_mean_infected"]);
    for (d, v) in before.iter().enumerate().take(switch_day) {
        t.push(vec![d.to_string(), date_at(cfg.town.start_date, d), "calibrated".into(), fmt(*v), fmt(*v)]);
    }
    for (k, (a, b)) in kept.iter().zip(&switched).enumerate() {
        let d = switch_day + k;
        t.push(vec![d.to_string(), date_at(cfg.town.start_date, d), "switched".into(), fmt(*a), fmt(*b)]);
    }
    write_table(&out.file("scenario.csv"), &t).runtime()?;
    let mut a = Table::new(&["replicate", "seed", "kept_attack_rate", "switched_attack_rate"]);
    for (k, r) in reps.iter().enumerate() {
        a.push(vec![k.to_string(), r.seed.to_string(), fmt(r.kept_attack_rate), fmt(r.switched_attack_rate)]);
    }
    write_table(&out.file("attack_rates.csv"), &a).runtime()?;
    let shift = |v: &[f64]| -> Vec<(f64, f64)> { v.iter().enumerate().map(|(k, x)| ((switch_day + k) as f64, *x)).collect() };
    let series = vec![
        ChartSeries::indexed("calibrated rules", before.iter().map(|v| Some(*v))),
        ChartSeries::new("rules kept", shift(&kept)),
        ChartSeries::new("rules switched", shift(&switched)),
    ];
    write_svg_chart(&out.file("scenario.svg"), "Policy switch", "day", "mean infected", &series).runtime()?;

    // S and I along the switched branch, for the effective β
    let mut s = mean_of(reps, |r| &r.before, susceptible);
    let mut i = before;
    s.truncate(switch_day);
    i.truncate(switch_day);
    s.extend(mean_of(reps, |r| &r.switched, susceptible));
    i.extend(switched);
    Ok((s, i))
}

fn scenario(
    cfg: &ExperimentConfig,
    switch_date: Option<NaiveDate>,
    extra_days: Option<u32>,
    n: Option<usize>,
    out_dir: &Path,
) -> Result<Output, Failure> {
    let n = n.unwrap_or(cfg.coupling.replicates);
    if n == 0 {
        return Err(Failure::Invalid(anyhow!("--n must be at least 1")));
    }
    let switch_day = match switch_date {
        Some(d) if d <= cfg.town.start_date => {
            return Err(Failure::Invalid(anyhow!("switch date {d} must follow the start date {}", cfg.town.start_date)))
        }
        Some(d) => (d - cfg.town.start_date).num_days() as u32,
        None => cfg.calibration_days(),
    };
    let policy = cfg
        .switch_policy()
        .ok_or_else(|| Failure::Invalid(anyhow!("policy_timeline has no second entry to switch to")))?;
    let extra = extra_days.unwrap_or(cfg.coupling.extra_days);
    let base = cfg.town_scenario(buildings(cfg)?, switch_day);
    let reps = switch_ensemble(&base, n, cfg.seeds.dynamics, &policy, extra).runtime()?;
    let mut out = Output::create(out_dir)?;
    write_scenario(&mut out, cfg, &reps, switch_day as usize)?;
    Ok(out)
}

fn pipeline(cfg: &ExperimentConfig, replicates: Option<usize>, out_dir: &Path) -> Result<Output, Failure> {
    let replicates = replicates.unwrap_or(cfg.coupling.replicates);
    if replicates == 0 {
        return Err(Failure::Invalid(anyhow!("--replicates must be at least 1")));
    }
    let (obs, fit_cfg) = fit_setup(cfg)?;
    let policy = cfg
        .switch_policy()
        .ok_or_else(|| Failure::Invalid(anyhow!("policy_timeline has no second entry to switch to")))?;
    let b = buildings(cfg)?;

    let fits = run_fit(&obs, &fit_cfg)?;
    let states = fitted_daily_states(&fits);
    let regional: Vec<f64> =
        states.iter().map(|s| (s.i_plus + s.i_minus) / fit_cfg.population * cfg.estimation.population).collect();
    let target = project_target(&regional, cfg.coupling.scale_factor, Some(obs.start_date())).runtime()?;
    let days = cfg.calibration_days();
    let aligned = align_target(target.clone(), cfg.town.start_date, 2)?;
    let days = days.min(aligned.len() as u32 - 1);
    let base = cfg.town_scenario(b, days);
    let result = calibrate(&cfg.coupling.grid, &aligned, replicates, cfg.seeds.dynamics, &base, cfg.coupling.metric)
        .runtime()?;
    let calibrated = cfg.coupling.grid.scenario_for(&base, result.best);
    let reps = switch_ensemble(&calibrated, replicates, cfg.seeds.dynamics, &policy, cfg.coupling.extra_days)
        .runtime()?;

    let mut out = Output::create(out_dir)?;
    write_fit(&mut out, &fits, &fit_cfg, &obs)?;
    write_target_csv(&target, &out.file("target.csv")).runtime()?;
    write_calibration(&mut out, &result, &aligned)?;
    let (s, i) = write_scenario(&mut out, cfg, &reps, days as usize)?;
    let n = calibrated.population.count as f64;
    let est = effective_beta(&s, &i, n, cfg.gamma_delta(), cfg.coupling.beta_method, cfg.coupling.smoothing)
        .runtime()?;
    let mut t = Table::new(&["day", "date", "beta_hat", "r0_hat"]);
    for (d, (b, r)) in est.beta.iter().zip(&est.r0).enumerate() {
        t.push(vec![d.to_string(), date_at(cfg.town.start_date, d), opt(*b), opt(*r)]);
    }
    write_table(&out.file("effective_beta.csv"), &t).runtime()?;
    write_svg_chart(
        &out.file("effective_beta.svg"),
        "Effective transmission rate",
        "day",
        "beta",
        &[ChartSeries::indexed("beta_hat", est.beta.iter().copied())],
    )
    .runtime()?;
    Ok(out)
}
