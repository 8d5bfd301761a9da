//! Bridges between the regional compartmental layer and the town model.
//!
//! Projection of a regional curve onto the town, replicate ensembles,
//! exhaustive calibration, mid-run policy switches and the extraction of an
//! effective transmission rate from town aggregates.

mod beta;

pub use beta::{effective_beta, fit_beta_windows, moving_average, BetaMethod, EffectiveBeta};

use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::replicate_seed;
use crate::town::{
    generate_population, run, Building, Counts, DiseaseConfig, Policy, PopulationConfig, PopulationError, TownError,
    TownTrajectory, World, TICKS_PER_DAY,
};

#[derive(Debug, Error, PartialEq)]
pub enum CouplingError {
    #[error("scale factor must be positive and finite, got {0}")]
    ScaleFactor(f64),
    #[error("invalid value {value} at day {index}")]
    InvalidValue { index: usize, value: f64 },
    #[error("at least one replicate is required")]
    NoReplicates,
    #[error("parameter grid: {0}")]
    Grid(String),
    #[error("target covers {have} days, the scenario needs {need}")]
    ShortTarget { have: usize, need: usize },
    #[error("series lengths differ: {0} vs {1}")]
    Length(usize, usize),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Town(#[from] TownError),
}

/// Expected town-level infected count per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCurve {
    pub start: Option<NaiveDate>,
    pub values: Vec<f64>,
}

impl TargetCurve {
    pub fn new(start: Option<NaiveDate>, values: Vec<f64>) -> Result<Self, CouplingError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(CouplingError::InvalidValue { index, value });
        }
        Ok(Self { start, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Divide a regional infected curve (I⁺ + I⁻) by the number of regional
/// residents one town resident stands for.
pub fn project_target(
    regional_infected: &[f64],
    scale_factor: f64,
    start: Option<NaiveDate>,
) -> Result<TargetCurve, CouplingError> {
    if !(scale_factor > 0.0 && scale_factor.is_finite()) {
        return Err(CouplingError::ScaleFactor(scale_factor));
    }
    TargetCurve::new(start, regional_infected.iter().map(|v| v / scale_factor).collect())
}

/// Everything needed to build a fresh town world, except the dynamics seed.
#[derive(Debug, Clone)]
pub struct TownScenario {
    pub buildings: Arc<[Building]>,
    pub population: PopulationConfig,
    pub population_seed: u64,
    pub disease: DiseaseConfig,
    pub policy: Policy,
    pub initial_infected: usize,
    pub days: u32,
    /// 0 = Monday.
    pub start_weekday: u8,
}

impl TownScenario {
    pub fn world(&self, dynamics_seed: u64) -> Result<World, CouplingError> {
        let population = generate_population(&self.buildings, &self.population, self.population_seed)?;
        let world = World::new(
            self.buildings.clone(),
            population,
            self.policy.clone(),
            self.disease.clone(),
            dynamics_seed,
            self.initial_infected,
        )?;
        Ok(world.with_start_weekday(self.start_weekday))
    }

    pub fn run(&self, dynamics_seed: u64) -> Result<TownTrajectory, CouplingError> {
        Ok(run(self.world(dynamics_seed)?, self.days))
    }
}

/// Ensemble statistics of the infected count (Iₐ + Iₛ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateStats {
    pub seeds: Vec<u64>,
    pub population: u32,
    /// Per tick, including the initial state.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Residents ever infected at the end of each run.
    pub final_sizes: Vec<f64>,
    /// Mean of the first n final sizes, n = 1..=N.
    pub running_mean: Vec<f64>,
}

impl ReplicateStats {
    pub fn from_runs(seeds: Vec<u64>, population: u32, infected: &[Vec<u32>], final_sizes: Vec<f64>) -> Self {
        let n = infected.len() as f64;
        let ticks = infected.iter().map(Vec::len).min().unwrap_or(0);
        let mut mean = vec![0.0; ticks];
        let mut std = vec![0.0; ticks];
        for t in 0..ticks {
            let m = infected.iter().map(|run| run[t] as f64).sum::<f64>() / n;
            mean[t] = m;
            if infected.len() > 1 {
                let ss: f64 = infected.iter().map(|run| (run[t] as f64 - m).powi(2)).sum();
                std[t] = (ss / (n - 1.0)).sqrt();
            }
        }
        let running_mean = running_mean(&final_sizes);
        Self { seeds, population, mean, std, final_sizes, running_mean }
    }

    pub fn replicates(&self) -> usize {
        self.seeds.len()
    }

    /// Daily samples of the ensemble mean, starting with day 0.
    pub fn daily_mean(&self) -> Vec<f64> {
        self.mean.iter().step_by(TICKS_PER_DAY as usize).copied().collect()
    }

    pub fn daily_std(&self) -> Vec<f64> {
        self.std.iter().step_by(TICKS_PER_DAY as usize).copied().collect()
    }

    /// `max |running_mean(n) − running_mean(N)| / running_mean(N)` over `n ≥ from`.
    pub fn running_mean_deviation(&self, from: usize) -> f64 {
        let last = *self.running_mean.last().unwrap_or(&0.0);
        self.running_mean
            .iter()
            .enumerate()
            .skip(from.saturating_sub(1))
            .map(|(_, m)| if last == 0.0 { (m - last).abs() } else { (m - last).abs() / last })
            .fold(0.0, f64::max)
    }
}

pub fn running_mean(values: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            sum += v;
            sum / (k + 1) as f64
        })
        .collect()
}

/// Run `n` replicates of `scenario` with seeds `replicate_seed(seed_base, cell, k)`.
///
/// Replicates run on the current rayon pool; results are gathered in replicate
/// order, so the statistics do not depend on the number of threads.
pub fn replicate_run(
    scenario: &TownScenario,
    n: usize,
    seed_base: u64,
    cell: u64,
) -> Result<ReplicateStats, CouplingError> {
    if n == 0 {
        return Err(CouplingError::NoReplicates);
    }
    let seeds: Vec<u64> = (0..n as u64).map(|k| replicate_seed(seed_base, cell, k)).collect();
    let runs: Vec<(Vec<u32>, f64, u32)> = seeds
        .par_iter()
        .map(|&seed| {
            let tr = scenario.run(seed)?;
            let last = tr.final_counts();
            let infected = tr.counts.iter().map(|c| c.infected()).collect();
            Ok((infected, (last.total() - last.susceptible) as f64, last.total()))
        })
        .collect::<Result<_, CouplingError>>()?;
    let population = runs[0].2;
    let finals = runs.iter().map(|r| r.1).collect();
    let infected: Vec<Vec<u32>> = runs.into_iter().map(|r| r.0).collect();
    Ok(ReplicateStats::from_runs(seeds, population, &infected, finals))
}

/// Town parameters that calibration may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridParam {
    TransmissionProbability,
    AsymptomaticFraction,
    MeanInfectiousDays,
    ComplianceProbability,
    CompliantSusceptibility,
    CompliantInfectiousness,
    InitialInfected,
}

impl GridParam {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TransmissionProbability => "transmission_probability",
            Self::AsymptomaticFraction => "asymptomatic_fraction",
            Self::MeanInfectiousDays => "mean_infectious_days",
            Self::ComplianceProbability => "compliance_probability",
            Self::CompliantSusceptibility => "compliant_susceptibility",
            Self::CompliantInfectiousness => "compliant_infectiousness",
            Self::InitialInfected => "initial_infected",
        }
    }

    pub fn apply(&self, scenario: &mut TownScenario, value: f64) {
        match self {
            Self::TransmissionProbability => scenario.disease.transmission_probability = value,
            Self::AsymptomaticFraction => scenario.disease.asymptomatic_fraction = value,
            Self::MeanInfectiousDays => scenario.disease.mean_infectious_days = value,
            Self::ComplianceProbability => scenario.population.compliance_probability = value,
            Self::CompliantSusceptibility => scenario.policy.compliant_susceptibility = value,
            Self::CompliantInfectiousness => scenario.policy.compliant_infectiousness = value,
            Self::InitialInfected => scenario.initial_infected = value.round().max(0.0) as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub param: GridParam,
    pub values: Vec<f64>,
}

/// Cartesian product of axes; cell indices are lexicographic with the last
/// axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid {
    pub axes: Vec<GridAxis>,
}

impl ParamGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self, CouplingError> {
        let grid = Self { axes };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), CouplingError> {
        if self.axes.is_empty() {
            return Err(CouplingError::Grid("no axes".into()));
        }
        for (k, axis) in self.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(CouplingError::Grid(format!("axis {} is empty", axis.param.name())));
            }
            if axis.values.iter().any(|v| !v.is_finite()) {
                return Err(CouplingError::Grid(format!("axis {} has a non-finite value", axis.param.name())));
            }
            if self.axes[..k].iter().any(|a| a.param == axis.param) {
                return Err(CouplingError::Grid(format!("axis {} appears twice", axis.param.name())));
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn cell(&self, mut index: usize) -> Vec<f64> {
        let mut values = vec![0.0; self.axes.len()];
        for (slot, axis) in values.iter_mut().zip(&self.axes).rev() {
            let n = axis.values.len();
            *slot = axis.values[index % n];
            index /= n;
        }
        values
    }

    pub fn scenario_for(&self, base: &TownScenario, index: usize) -> TownScenario {
        let mut s = base.clone();
        for (axis, value) in self.axes.iter().zip(self.cell(index)) {
            axis.param.apply(&mut s, value);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    L2,
    L1,
}

impl DistanceMetric {
    pub fn distance(&self, curve: &[f64], target: &[f64]) -> f64 {
        let diffs = curve.iter().zip(target).map(|(a, b)| a - b);
        match self {
            Self::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Self::L1 => diffs.map(f64::abs).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    pub values: Vec<f64>,
    pub distance: f64,
    /// Daily ensemble mean of infected.
    pub daily_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: Vec<GridParam>,
    pub cells: Vec<CellResult>,
    pub best: usize,
    pub replicates: usize,
    pub seed_base: u64,
    pub metric: DistanceMetric,
}

impl CalibrationResult {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }
}

/// Distance between the daily ensemble mean of one cell and the target.
pub fn evaluate_cell(
    grid: &ParamGrid,
    index: usize,
    base: &TownScenario,
    target: &TargetCurve,
    replicates: usize,
    seed_base: u64,
    metric: DistanceMetric,
) -> Result<CellResult, CouplingError> {
    let need = base.days as usize + 1;
    if target.len() < need {
        return Err(CouplingError::ShortTarget { have: target.len(), need });
    }
    let stats = replicate_run(&grid.scenario_for(base, index), replicates, seed_base, index as u64)?;
    let daily_mean = stats.daily_mean();
    Ok(CellResult {
        index,
        values: grid.cell(index),
        distance: metric.distance(&daily_mean, &target.values[..need]),
        daily_mean,
    })
}

/// Exhaustive search for the cell whose ensemble mean is closest to `target`.
///
/// Cells and their replicates are evaluated in parallel; each replicate's seed
/// depends only on `(seed_base, cell, replicate)`, and ties go to the lowest
/// cell index, so the result does not depend on scheduling.
pub fn calibrate(
    grid: &ParamGrid,
    target: &TargetCurve,
    replicates: usize,
    seed_base: u64,
    base: &TownScenario,
    metric: DistanceMetric,
) -> Result<CalibrationResult, CouplingError> {
    grid.validate()?;
    if replicates == 0 {
        return Err(CouplingError::NoReplicates);
    }
    let cells: Vec<CellResult> = (0..grid.cell_count())
        .into_par_iter()
        .map(|index| evaluate_cell(grid, index, base, target, replicates, seed_base, metric))
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for c in &cells {
        if c.distance < cells[best].distance {
            best = c.index;
        }
    }
    Ok(CalibrationResult {
        params: grid.axes.iter().map(|a| a.param).collect(),
        cells,
        best,
        replicates,
        seed_base,
        metric,
    })
}

/// Continue the live `world` under `policy` for `extra_days`.
pub fn scenario_switch(mut world: World, policy: Policy, extra_days: u32) -> Result<TownTrajectory, CouplingError> {
    world.apply_policy(policy)?;
    Ok(run(world, extra_days))
}

/// One replicate of a policy switch: the common history, then both branches
/// continued from clones of the same world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchReplicate {
    pub seed: u64,
    /// Daily aggregates before the switch, day 0 included.
    pub before: Vec<Counts>,
    /// Daily aggregates after the switch under the old rules, switch day first.
    pub kept: Vec<Counts>,
    pub switched: Vec<Counts>,
    pub kept_attack_rate: f64,
    pub switched_attack_rate: f64,
}

fn attack_rate(tr: &TownTrajectory) -> f64 {
    let c = tr.final_counts();
    (c.total() - c.susceptible) as f64 / c.total() as f64
}

/// Run `scenario` for its horizon, then continue each replicate both with the
/// original policy and with `new_policy` for `extra_days`.
pub fn switch_ensemble(
    scenario: &TownScenario,
    n: usize,
    seed_base: u64,
    new_policy: &Policy,
    extra_days: u32,
) -> Result<Vec<SwitchReplicate>, CouplingError> {
    if n == 0 {
        return Err(CouplingError::NoReplicates);
    }
    new_policy.validate().map_err(TownError::Policy)?;
    (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let seed = replicate_seed(seed_base, 0, k);
            let calibrated = scenario.run(seed)?;
            let before = calibrated.daily();
            let kept = run(calibrated.world.clone(), extra_days);
            let switched = scenario_switch(calibrated.world, new_policy.clone(), extra_days)?;
            Ok(SwitchReplicate {
                seed,
                before,
                kept_attack_rate: attack_rate(&kept),
                switched_attack_rate: attack_rate(&switched),
                kept: kept.daily(),
                switched: switched.daily(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::town::{synthetic_layout, LayoutCounts};

    fn scenario(days: u32) -> TownScenario {
        TownScenario {
            buildings: synthetic_layout(
                &LayoutCounts { residential: 40, industrial: 3, educational: 1, commercial: 2, restauration: 2 },
                1,
            )
            .into(),
            population: PopulationConfig { count: 150, ..Default::default() },
            population_seed: 2,
            disease: DiseaseConfig { transmission_probability: 0.0005, ..Default::default() },
            policy: Policy::lockdown(),
            initial_infected: 5,
            days,
            start_weekday: 4,
        }
    }

    #[test]
    fn projection_divides_by_scale() {
        let t = project_target(&[16200.0, 60000.0, 0.0], 600.0, None).unwrap();
        assert_eq!(t.values, vec![27.0, 100.0, 0.0]);
        assert_eq!(project_target(&[3.5, 7.0], 1.0, None).unwrap().values, vec![3.5, 7.0]);
        assert!(project_target(&[1.0], 0.0, None).is_err());
        assert!(project_target(&[-1.0], 2.0, None).is_err());
    }

    #[test]
    fn grid_cells_are_lexicographic() {
        let grid = ParamGrid::new(vec![
            GridAxis { param: GridParam::TransmissionProbability, values: vec![1.0, 2.0] },
            GridAxis { param: GridParam::AsymptomaticFraction, values: vec![0.1, 0.2, 0.3] },
        ])
        .unwrap();
        assert_eq!(grid.cell_count(), 6);
        assert_eq!(grid.cell(0), vec![1.0, 0.1]);
        assert_eq!(grid.cell(1), vec![1.0, 0.2]);
        assert_eq!(grid.cell(5), vec![2.0, 0.3]);
        assert!(ParamGrid::new(vec![GridAxis { param: GridParam::InitialInfected, values: vec![] }]).is_err());
    }

    #[test]
    fn single_replicate_has_zero_spread() {
        let stats = replicate_run(&scenario(2), 1, 5, 0).unwrap();
        assert!(stats.std.iter().all(|s| *s == 0.0));
        assert_eq!(stats.mean.len(), 2 * 144 + 1);
        assert_eq!(stats.daily_mean().len(), 3);
    }

    #[test]
    fn running_mean_of_constant_is_constant() {
        assert_eq!(running_mean(&[4.0, 4.0, 4.0]), vec![4.0, 4.0, 4.0]);
        let stats = ReplicateStats::from_runs(vec![1, 2], 10, &[vec![1, 3], vec![3, 3]], vec![5.0, 5.0]);
        assert_eq!(stats.mean, vec![2.0, 3.0]);
        assert_eq!(stats.std[1], 0.0);
        assert!((stats.std[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(stats.running_mean_deviation(1), 0.0);
    }

    #[test]
    fn single_cell_grid_and_short_target() {
        let s = scenario(2);
        let grid =
            ParamGrid::new(vec![GridAxis { param: GridParam::TransmissionProbability, values: vec![0.001] }]).unwrap();
        let target = TargetCurve::new(None, vec![5.0; 3]).unwrap();
        let res = calibrate(&grid, &target, 2, 1, &s, DistanceMetric::L2).unwrap();
        assert_eq!(res.best, 0);
        let short = TargetCurve::new(None, vec![5.0; 2]).unwrap();
        assert_eq!(
            calibrate(&grid, &short, 2, 1, &s, DistanceMetric::L2).unwrap_err(),
            CouplingError::ShortTarget { have: 2, need: 3 }
        );
    }

    #[test]
    fn identical_policy_switch_matches_plain_continuation() {
        let s = scenario(2);
        let tr = s.run(3).unwrap();
        let plain = run(tr.world.clone(), 2);
        let switched = scenario_switch(tr.world, s.policy.clone(), 2).unwrap();
        assert_eq!(plain.counts, switched.counts);
    }

    #[test]
    fn switch_without_infection_stays_flat() {
        let mut s = scenario(1);
        s.initial_infected = 0;
        let reps = switch_ensemble(&s, 2, 1, &Policy::open(), 2).unwrap();
        for r in reps {
            assert!(r.switched.iter().all(|c| c.infected() == 0));
            assert_eq!(r.switched_attack_rate, 0.0);
        }
    }
}
