use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{read_text, IoError};
use crate::compartmental::{BetaSchedule, CharpParams, SirdParams, DEFAULT_DT};
use crate::coupling::{BetaMethod, DistanceMetric, GridAxis, GridParam, ParamGrid, TownScenario};
use crate::estimation::{Bounds, FitConfig, FreeParam};
use crate::town::{Building, DiseaseConfig, LayoutCounts, Policy, PopulationConfig};

/// One JSON document describing every stage of an experiment. Every section
/// and field is optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub compartmental: CompartmentalSection,
    pub estimation: EstimationSection,
    pub town: TownSection,
    pub policy_timeline: Vec<PolicyRecord>,
    pub coupling: CouplingSection,
    pub io: IoSection,
    pub seeds: SeedSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sird,
    Charpentier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompartmentalSection {
    pub model: ModelKind,
    pub sird: SirdParams,
    /// Also the fixed rates of the estimation.
    pub charpentier: CharpParams,
    /// Total population; states are in the same unit.
    pub population: f64,
    /// Initial infected (I for SIRD, I⁻ for Charpentier).
    pub initial_infected: f64,
    pub days: f64,
    pub dt: f64,
}

impl Default for CompartmentalSection {
    fn default() -> Self {
        Self {
            model: ModelKind::Charpentier,
            sird: SirdParams::new(BetaSchedule::Constant(0.3), 0.01, 0.09),
            charpentier: CharpParams {
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
            },
            population: 1.0,
            initial_infected: 1e-4,
            days: 100.0,
            dt: DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSection {
    pub free: Vec<FreeParam>,
    pub initial_guess: Vec<f64>,
    pub bounds: Vec<Bounds>,
    /// Observations are divided by this before fitting, so the fit works in
    /// population fractions.
    pub population: f64,
    /// Undetected infected on the first day, as a fraction.
    pub seeds: f64,
    pub window: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub fd_step: f64,
    pub damping_floor: f64,
    pub weights: [f64; 3],
    pub dt: f64,
}

impl Default for EstimationSection {
    fn default() -> Self {
        let f = FitConfig::new(CharpParams::default(), 1e-4);
        Self {
            free: f.free,
            initial_guess: f.initial_guess,
            bounds: f.bounds,
            population: 1.0,
            seeds: f.seeds,
            window: f.window,
            max_iterations: f.max_iterations,
            tolerance: f.tolerance,
            fd_step: f.fd_step,
            damping_floor: f.damping_floor,
            weights: f.weights,
            dt: f.dt,
        }
    }
}

impl EstimationSection {
    pub fn fit_config(&self, base: CharpParams) -> FitConfig {
        FitConfig {
            base,
            free: self.free.clone(),
            initial_guess: self.initial_guess.clone(),
            bounds: self.bounds.clone(),
            population: 1.0,
            seeds: self.seeds,
            initial_state: None,
            window: self.window,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            fd_step: self.fd_step,
            damping_floor: self.damping_floor,
            weights: self.weights,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TownSection {
    /// Synthetic layout used when no building file is given.
    pub layout: LayoutCounts,
    pub population: PopulationConfig,
    pub disease: DiseaseConfig,
    pub initial_infected: usize,
    /// Total simulated days for `simulate-town`.
    pub days: u32,
    pub start_date: NaiveDate,
}

impl Default for TownSection {
    fn default() -> Self {
        Self {
            layout: LayoutCounts::default(),
            population: PopulationConfig::default(),
            disease: DiseaseConfig::default(),
            initial_infected: 30,
            days: 76,
            start_date: NaiveDate::from_ymd_opt(2020, 10, 30).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyPreset {
    Open,
    Lockdown,
    Lifted,
}

/// A preset name or a full policy object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Preset(PolicyPreset),
    Custom(Policy),
}

impl PolicySpec {
    pub fn resolve(&self) -> Policy {
        match self {
            Self::Preset(PolicyPreset::Open) => Policy::open(),
            Self::Preset(PolicyPreset::Lockdown) => Policy::lockdown(),
            Self::Preset(PolicyPreset::Lifted) => Policy::lifted(),
            Self::Custom(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRecord {
    /// The policy applies from midnight of this date.
    pub date: NaiveDate,
    pub policy: PolicySpec,
}

fn default_timeline() -> Vec<PolicyRecord> {
    vec![
        PolicyRecord {
            date: NaiveDate::from_ymd_opt(2020, 10, 30).expect("valid date"),
            policy: PolicySpec::Preset(PolicyPreset::Lockdown),
        },
        PolicyRecord {
            date: NaiveDate::from_ymd_opt(2020, 12, 15).expect("valid date"),
            policy: PolicySpec::Preset(PolicyPreset::Lifted),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub grid: ParamGrid,
    /// Regional residents represented by one town resident.
    pub scale_factor: f64,
    pub replicates: usize,
    pub metric: DistanceMetric,
    /// Days simulated after the policy switch.
    pub extra_days: u32,
    pub beta_method: BetaMethod,
    pub smoothing: usize,
    /// γ+δ used to turn β̂ into R̂₀; defaults to 1 / mean infectious days.
    pub gamma_delta: Option<f64>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            grid: ParamGrid {
                axes: vec![
                    GridAxis { param: GridParam::TransmissionProbability, values: vec![4e-5, 8e-5, 1.6e-4] },
                    GridAxis { param: GridParam::ComplianceProbability, values: vec![0.6, 0.8, 0.95] },
                    GridAxis { param: GridParam::AsymptomaticFraction, values: vec![0.3, 0.4, 0.5] },
                ],
            },
            scale_factor: 600.0,
            replicates: 30,
            metric: DistanceMetric::L2,
            extra_days: 30,
            beta_method: BetaMethod::Trapezoid,
            smoothing: 1,
            gamma_delta: None,
        }
    }
}

/// Input files, relative to the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub observations: Option<PathBuf>,
    pub buildings: Option<PathBuf>,
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    /// Synthetic building layout.
    pub layout: u64,
    /// Population synthesis stream.
    pub population: u64,
    /// Base of the dynamics streams; replicate seeds are derived from it.
    pub dynamics: u64,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self { layout: 1, population: 2, dynamics: 3 }
    }
}

impl ExperimentConfig {
    /// Parse and validate. Relative `io` paths are resolved against the
    /// directory of `path`.
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = read_text(path)?;
        let mut cfg = Self::parse(&text, path)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.io.observations, &mut cfg.io.buildings, &mut cfg.io.target].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, IoError> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| IoError::Json {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if cfg.policy_timeline.is_empty() {
            cfg.policy_timeline = default_timeline();
        }
        cfg.validate().map_err(|message| IoError::Config { path: path.to_path_buf(), message })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let c = &self.compartmental;
        if !(c.dt > 0.0 && c.dt.is_finite()) || !(c.days >= 0.0 && c.days.is_finite()) {
            return Err("compartmental: need dt > 0 and days >= 0".into());
        }
        if !(c.population > 0.0) || !(c.initial_infected >= 0.0) || c.initial_infected > c.population {
            return Err("compartmental: need population > 0 and 0 <= initial_infected <= population".into());
        }
        if [c.sird.gamma, c.sird.delta].iter().any(|r| !(*r >= 0.0)) {
            return Err("compartmental.sird: rates must be non-negative".into());
        }
        if c.charpentier.rates().iter().any(|r| !(*r >= 0.0)) {
            return Err("compartmental.charpentier: rates must be non-negative".into());
        }
        if !(self.estimation.population > 0.0) {
            return Err("estimation.population must be positive".into());
        }
        self.estimation.fit_config(c.charpentier.clone()).validate().map_err(|e| format!("estimation: {e}"))?;
        let t = &self.town;
        t.population.validate().map_err(|e| format!("town.population: {e}"))?;
        t.disease.validate().map_err(|e| format!("town.disease: {e}"))?;
        if t.initial_infected > t.population.count {
            return Err("town.initial_infected exceeds the population".into());
        }
        if self.policy_timeline.first().map(|r| r.date) != Some(t.start_date) {
            return Err("policy_timeline must start on town.start_date".into());
        }
        for (k, r) in self.policy_timeline.iter().enumerate() {
            r.policy.resolve().validate().map_err(|e| format!("policy_timeline[{k}]: {e}"))?;
            if k > 0 && r.date <= self.policy_timeline[k - 1].date {
                return Err("policy_timeline dates must be strictly increasing".into());
            }
        }
        let cp = &self.coupling;
        cp.grid.validate().map_err(|e| format!("coupling: {e}"))?;
        if !(cp.scale_factor > 0.0 && cp.scale_factor.is_finite()) {
            return Err("coupling.scale_factor must be positive".into());
        }
        if cp.replicates == 0 {
            return Err("coupling.replicates must be at least 1".into());
        }
        if cp.gamma_delta.is_some_and(|g| !(g > 0.0)) {
            return Err("coupling.gamma_delta must be positive".into());
        }
        Ok(())
    }

    /// Weekday of the first simulated day, 0 = Monday.
    pub fn start_weekday(&self) -> u8 {
        self.town.start_date.weekday().num_days_from_monday() as u8
    }

    /// Policy changes as `(day offset, policy)`, the first at day 0.
    pub fn phases(&self) -> Vec<(u32, Policy)> {
        self.policy_timeline
            .iter()
            .map(|r| ((r.date - self.town.start_date).num_days() as u32, r.policy.resolve()))
            .collect()
    }

    /// Days under the initial policy: up to the first switch, or the whole
    /// town horizon when there is none.
    pub fn calibration_days(&self) -> u32 {
        self.phases().get(1).map_or(self.town.days, |p| p.0)
    }

    /// The policy adopted at the first switch, if any.
    pub fn switch_policy(&self) -> Option<Policy> {
        self.phases().get(1).map(|p| p.1.clone())
    }

    pub fn gamma_delta(&self) -> f64 {
        self.coupling.gamma_delta.unwrap_or(1.0 / self.town.disease.mean_infectious_days)
    }

    pub fn town_scenario(&self, buildings: Arc<[Building]>, days: u32) -> TownScenario {
        TownScenario {
            buildings,
            population: self.town.population.clone(),
            population_seed: self.seeds.population,
            disease: self.town.disease.clone(),
            policy: self.phases()[0].1.clone(),
            initial_infected: self.town.initial_infected,
            days,
            start_weekday: self.start_weekday(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("c.json")
    }

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::parse("{}", p()).unwrap();
        assert_eq!(cfg.calibration_days(), 46);
        assert_eq!(cfg.start_weekday(), 4);
        assert_eq!(cfg.switch_policy(), Some(Policy::lifted()));
        assert_eq!(cfg.coupling.grid.cell_count(), 27);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::parse(r#"{"towns": {}}"#, p()), Err(IoError::Json { .. })));
        assert!(matches!(
            ExperimentConfig::parse(r#"{"town": {"disease": {"transmision_probability": 0.1}}}"#, p()),
            Err(IoError::Json { .. })
        ));
    }

    #[test]
    fn semantic_validation() {
        let bad = r#"{"coupling": {"replicates": 0}}"#;
        assert!(matches!(ExperimentConfig::parse(bad, p()), Err(IoError::Config { .. })));
        let late = r#"{"policy_timeline": [{"date": "2020-11-02", "policy": "open"}]}"#;
        assert!(matches!(ExperimentConfig::parse(late, p()), Err(IoError::Config { .. })));
    }

    #[test]
    fn policy_specs() {
        let cfg = ExperimentConfig::parse(
            r#"{"policy_timeline": [
                {"date": "2020-10-30", "policy": {"lockdown": true, "compliant_susceptibility": 0.7}},
                {"date": "2020-11-09", "policy": "open"}]}"#,
            p(),
        )
        .unwrap();
        let phases = cfg.phases();
        assert_eq!(phases[1], (10, Policy::open()));
        assert!(phases[0].1.lockdown && phases[0].1.compliant_susceptibility == 0.7);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&json, p()).unwrap(), cfg);
    }
}
