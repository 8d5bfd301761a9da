//! World state, movement, transmission and the tick loop.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Building, BuildingId, Category, DiseaseConfig, HealthState, Policy, Population, Resident, ResidentId};
use super::{AgeGroup, TICKS_PER_DAY};
use crate::rng::{rng_from_seed, SimRng};

/// Aggregate health counts at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub susceptible: u32,
    pub asymptomatic: u32,
    pub symptomatic: u32,
    pub recovered: u32,
}

impl Counts {
    pub fn of<'a>(residents: impl IntoIterator<Item = &'a Resident>) -> Self {
        let mut c = Counts::default();
        for r in residents {
            match r.health {
                HealthState::Susceptible => c.susceptible += 1,
                HealthState::InfectedAsymptomatic => c.asymptomatic += 1,
                HealthState::InfectedSymptomatic => c.symptomatic += 1,
                HealthState::Recovered => c.recovered += 1,
            }
        }
        c
    }

    pub fn infected(&self) -> u32 {
        self.asymptomatic + self.symptomatic
    }

    pub fn total(&self) -> u32 {
        self.susceptible + self.infected() + self.recovered
    }
}

/// Simulation time. Tick 0 is midnight of the first day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub tick: u64,
    /// Weekday of day 0, 0 = Monday.
    pub start_weekday: u8,
}

impl Clock {
    pub fn day(&self) -> u64 {
        self.tick / TICKS_PER_DAY as u64
    }

    pub fn tick_of_day(&self) -> u32 {
        (self.tick % TICKS_PER_DAY as u64) as u32
    }

    pub fn weekday(&self) -> u8 {
        ((self.start_weekday as u64 + self.day()) % 7) as u8
    }
}

/// Where `resident` is during the tick at `clock` under `policy`.
pub fn current_destination(resident: &Resident, buildings: &[Building], clock: Clock, policy: &Policy) -> BuildingId {
    let home = resident.home;
    if resident.health == HealthState::InfectedSymptomatic && resident.compliant {
        return home;
    }
    let tod = clock.tick_of_day();
    let day_bit = 1u8 << clock.weekday();
    let agenda = &resident.agenda;

    if let (Some(slot), Some(work)) = (agenda.work, resident.workplace) {
        if agenda.work_days & day_bit != 0 && slot.contains(tod) {
            return match resident.age_group {
                AgeGroup::Child if !policy.schools_open => home,
                AgeGroup::Active if policy.lockdown && resident.can_work_from_home => home,
                AgeGroup::Active
                    if policy.restauration_closed && buildings[work as usize].category == Category::Restauration =>
                {
                    home
                }
                _ => work,
            };
        }
    }
    let curfew = policy.curfew_active(tod);
    if let (Some(slot), Some(shop)) = (agenda.shop, resident.shop) {
        if agenda.shop_days & day_bit != 0 && slot.contains(tod) && !curfew {
            return shop;
        }
    }
    if let (Some(slot), Some(venue)) = (agenda.social, resident.venue) {
        if agenda.social_days & day_bit != 0 && slot.contains(tod) && !curfew && !policy.restauration_closed {
            return venue;
        }
    }
    home
}

/// Per-contact transmission probability between two co-located agents.
pub fn infection_probability(
    susceptible: &Resident,
    infectious: &Resident,
    building: BuildingId,
    policy: &Policy,
    disease: &DiseaseConfig,
) -> f64 {
    let at_shared_home = building == susceptible.home && building == infectious.home;
    let mut p = disease.transmission_probability;
    if !(at_shared_home && disease.no_precautions_at_home) {
        if susceptible.compliant {
            p *= policy.compliant_susceptibility;
        }
        if infectious.compliant {
            p *= policy.compliant_infectiousness;
        }
    }
    p
}

/// Newly infected occupants of `building` for one tick, in occupant order.
///
/// Each susceptible meets every infectious occupant, or `contact_cap` of them
/// drawn uniformly, and each contact transmits independently.
pub fn infection_update(
    occupants: &[&Resident],
    building: BuildingId,
    policy: &Policy,
    disease: &DiseaseConfig,
    rng: &mut SimRng,
) -> Vec<ResidentId> {
    let infectious: Vec<&Resident> = occupants.iter().copied().filter(|r| r.health.is_infected()).collect();
    let mut infected = Vec::new();
    if infectious.is_empty() {
        return infected;
    }
    for s in occupants.iter().filter(|r| r.health == HealthState::Susceptible) {
        let escape = match disease.contact_cap {
            Some(cap) if infectious.len() > cap => index::sample(rng, infectious.len(), cap)
                .into_iter()
                .map(|k| 1.0 - infection_probability(s, infectious[k], building, policy, disease))
                .product::<f64>(),
            _ => infectious
                .iter()
                .map(|i| 1.0 - infection_probability(s, i, building, policy, disease))
                .product(),
        };
        let p = 1.0 - escape;
        if p > 0.0 && rng.random::<f64>() < p {
            infected.push(s.id);
        }
    }
    infected
}

/// Make a susceptible resident infectious, drawing symptoms and duration.
pub fn infect(resident: &mut Resident, disease: &DiseaseConfig, rng: &mut SimRng) {
    debug_assert_eq!(resident.health, HealthState::Susceptible);
    resident.health = if rng.random::<f64>() < disease.asymptomatic_fraction {
        HealthState::InfectedAsymptomatic
    } else {
        HealthState::InfectedSymptomatic
    };
    let lo = disease.mean_infectious_days - disease.spread_days;
    let hi = disease.mean_infectious_days + disease.spread_days;
    let days = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    resident.infection_clock = ((days * TICKS_PER_DAY as f64).round() as u32).max(1);
}

/// One tick of illness; recovery when the clock runs out.
pub fn progress_disease(resident: &mut Resident) {
    if resident.health.is_infected() {
        resident.infection_clock = resident.infection_clock.saturating_sub(1);
        if resident.infection_clock == 0 {
            resident.health = HealthState::Recovered;
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TownError {
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("invalid disease configuration: {0}")]
    Disease(String),
    #[error("cannot seed {requested} infections among {available} residents")]
    Seeding { requested: usize, available: usize },
    #[error("resident {resident} refers to unknown building {building}")]
    UnknownBuilding { resident: ResidentId, building: BuildingId },
}

/// A live town. Cloning gives an independent copy, RNG state included.
#[derive(Debug, Clone)]
pub struct World {
    buildings: Arc<[Building]>,
    population: Population,
    policy: Policy,
    disease: DiseaseConfig,
    rng: SimRng,
    clock: Clock,
    locations: Vec<BuildingId>,
    log: Vec<Counts>,
    // scratch, indexed by building
    infectious_at: Vec<Vec<ResidentId>>,
    susceptible_at: Vec<Vec<ResidentId>>,
}

impl World {
    /// Everyone starts at home at midnight; `initial_infected` residents drawn
    /// with the dynamics stream are infected before the first log entry.
    pub fn new(
        buildings: Arc<[Building]>,
        population: Population,
        policy: Policy,
        disease: DiseaseConfig,
        dynamics_seed: u64,
        initial_infected: usize,
    ) -> Result<Self, TownError> {
        policy.validate().map_err(TownError::Policy)?;
        disease.validate().map_err(TownError::Disease)?;
        let n_buildings = buildings.len();
        for r in &population.residents {
            for b in [Some(r.home), r.workplace, r.shop, r.venue].into_iter().flatten() {
                if b as usize >= n_buildings {
                    return Err(TownError::UnknownBuilding { resident: r.id, building: b });
                }
            }
        }
        let susceptible: Vec<ResidentId> = population
            .residents
            .iter()
            .filter(|r| r.health == HealthState::Susceptible)
            .map(|r| r.id)
            .collect();
        if initial_infected > susceptible.len() {
            return Err(TownError::Seeding { requested: initial_infected, available: susceptible.len() });
        }
        let mut world = Self {
            locations: population.residents.iter().map(|r| r.home).collect(),
            buildings,
            population,
            policy,
            disease,
            rng: rng_from_seed(dynamics_seed),
            clock: Clock { tick: 0, start_weekday: 4 },
            log: Vec::new(),
            infectious_at: vec![Vec::new(); n_buildings],
            susceptible_at: vec![Vec::new(); n_buildings],
        };
        let mut chosen: Vec<usize> = index::sample(&mut world.rng, susceptible.len(), initial_infected).into_vec();
        chosen.sort_unstable();
        for k in chosen {
            let id = susceptible[k] as usize;
            infect(&mut world.population.residents[id], &world.disease, &mut world.rng);
        }
        world.log.push(world.counts());
        Ok(world)
    }

    /// Weekday of day 0 (0 = Monday). Only meaningful before the first step.
    pub fn with_start_weekday(mut self, weekday: u8) -> Self {
        self.clock.start_weekday = weekday % 7;
        self
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn residents(&self) -> &[Resident] {
        &self.population.residents
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn disease(&self) -> &DiseaseConfig {
        &self.disease
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    /// Building occupied by each resident during the last tick.
    pub fn locations(&self) -> &[BuildingId] {
        &self.locations
    }

    /// Aggregates since creation, one per tick plus the initial state.
    pub fn log(&self) -> &[Counts] {
        &self.log
    }

    pub fn counts(&self) -> Counts {
        Counts::of(&self.population.residents)
    }

    /// Switch rules mid-run; health states, clocks and RNG are untouched.
    pub fn apply_policy(&mut self, policy: Policy) -> Result<(), TownError> {
        policy.validate().map_err(TownError::Policy)?;
        self.policy = policy;
        Ok(())
    }

    /// Advance one tick: move, transmit (from start-of-tick states), progress
    /// illnesses already present, then start the new infections.
    pub fn step(&mut self) {
        let residents = &self.population.residents;
        for (loc, r) in self.locations.iter_mut().zip(residents) {
            *loc = current_destination(r, &self.buildings, self.clock, &self.policy);
        }

        let mut touched: Vec<BuildingId> = Vec::new();
        for r in residents.iter().filter(|r| r.health.is_infected()) {
            let b = self.locations[r.id as usize];
            if self.infectious_at[b as usize].is_empty() {
                touched.push(b);
            }
            self.infectious_at[b as usize].push(r.id);
        }
        let mut new_infections = Vec::new();
        if !touched.is_empty() {
            for r in residents.iter().filter(|r| r.health == HealthState::Susceptible) {
                let b = self.locations[r.id as usize] as usize;
                if !self.infectious_at[b].is_empty() {
                    self.susceptible_at[b].push(r.id);
                }
            }
            touched.sort_unstable();
            for &b in &touched {
                let bi = b as usize;
                if !self.susceptible_at[bi].is_empty() {
                    let occupants: Vec<&Resident> = self.susceptible_at[bi]
                        .iter()
                        .chain(&self.infectious_at[bi])
                        .map(|&id| &residents[id as usize])
                        .collect();
                    new_infections.extend(infection_update(&occupants, b, &self.policy, &self.disease, &mut self.rng));
                }
                self.infectious_at[bi].clear();
                self.susceptible_at[bi].clear();
            }
        }

        let residents = &mut self.population.residents;
        for r in residents.iter_mut() {
            progress_disease(r);
        }
        for id in new_infections {
            infect(&mut residents[id as usize], &self.disease, &mut self.rng);
        }
        self.clock.tick += 1;
        self.log.push(Counts::of(residents.iter()));
    }
}

/// Aggregates of one run plus the world it ended in.
#[derive(Debug, Clone)]
pub struct TownTrajectory {
    /// Starts with the state before the first tick.
    pub counts: Vec<Counts>,
    pub world: World,
}

impl TownTrajectory {
    /// One sample per day, starting with the initial state.
    pub fn daily(&self) -> Vec<Counts> {
        self.counts.iter().step_by(TICKS_PER_DAY as usize).copied().collect()
    }

    pub fn daily_infected(&self) -> Vec<f64> {
        self.daily().iter().map(|c| c.infected() as f64).collect()
    }

    pub fn final_counts(&self) -> Counts {
        *self.counts.last().expect("trajectory holds the initial sample")
    }
}

/// Step `world` for `days` whole days.
pub fn run(mut world: World, days: u32) -> TownTrajectory {
    let from = world.log.len() - 1;
    for _ in 0..days as u64 * TICKS_PER_DAY as u64 {
        world.step();
    }
    TownTrajectory { counts: world.log[from..].to_vec(), world }
}
