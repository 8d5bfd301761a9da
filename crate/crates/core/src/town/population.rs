//! Synthetic residents: age groups, homes, workplaces, agendas, friends.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Building, BuildingId, Category, TICKS_PER_DAY};
use crate::rng::{rng_from_seed, SimRng};

pub type ResidentId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    Child,
    Active,
    Retired,
}

impl AgeGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Child => "child",
            Self::Active => "active",
            Self::Retired => "retired",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealthState {
    Susceptible,
    InfectedAsymptomatic,
    InfectedSymptomatic,
    Recovered,
}

impl HealthState {
    pub fn is_infected(&self) -> bool {
        matches!(self, Self::InfectedAsymptomatic | Self::InfectedSymptomatic)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Susceptible => "S",
            Self::InfectedAsymptomatic => "Ia",
            Self::InfectedSymptomatic => "Is",
            Self::Recovered => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfDay {
    Morning,
    Afternoon,
}

/// `[start, end)` in ticks of the day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub start: u32,
    pub end: u32,
}

impl Slot {
    pub fn contains(&self, tick_of_day: u32) -> bool {
        tick_of_day >= self.start && tick_of_day < self.end
    }
}

/// Bit `d` set means the activity happens on weekday `d` (0 = Monday).
pub type DayMask = u8;

pub const WORKDAYS: DayMask = 0b0001_1111;

/// Weekly template of a resident's activities; every tick not covered is rest
/// at home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agenda {
    pub work: Option<Slot>,
    pub work_days: DayMask,
    pub shop_preference: HalfDay,
    pub shop: Option<Slot>,
    pub shop_days: DayMask,
    pub social: Option<Slot>,
    pub social_days: DayMask,
}

impl Agenda {
    pub fn rest() -> Self {
        Self {
            work: None,
            work_days: 0,
            shop_preference: HalfDay::Morning,
            shop: None,
            shop_days: 0,
            social: None,
            social_days: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resident {
    pub id: ResidentId,
    pub age_group: AgeGroup,
    pub home: BuildingId,
    /// School for children, none for retired people.
    pub workplace: Option<BuildingId>,
    pub shop: Option<BuildingId>,
    /// Restauration building where the friend group meets.
    pub venue: Option<BuildingId>,
    pub agenda: Agenda,
    pub friends: Vec<ResidentId>,
    pub can_work_from_home: bool,
    pub compliant: bool,
    pub health: HealthState,
    /// Remaining infectious ticks; positive exactly when infected.
    pub infection_clock: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shares {
    pub child: f64,
    pub active: f64,
    pub retired: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkplaceShares {
    pub industrial: f64,
    pub commercial: f64,
    pub educational: f64,
    pub restauration: f64,
}

/// Distributions for population synthesis. Defaults are documented guesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub count: usize,
    pub age_shares: Shares,
    pub workplace_shares: WorkplaceShares,
    /// Among office (industrial) workers.
    pub work_from_home_probability: f64,
    pub compliance_probability: f64,
    /// Work starts at `work_start ± jitter` and ends at `work_end ± jitter`.
    pub work_start: u32,
    pub work_end: u32,
    pub work_jitter: u32,
    pub school: Slot,
    pub shop_trips_per_week: [u32; 2],
    pub shop_duration: u32,
    pub friend_group_size: [usize; 2],
    pub social_evenings_per_week: [u32; 2],
    pub social: Slot,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            count: 2143,
            age_shares: Shares { child: 0.22, active: 0.53, retired: 0.25 },
            workplace_shares: WorkplaceShares {
                industrial: 0.5,
                commercial: 0.3,
                educational: 0.08,
                restauration: 0.12,
            },
            work_from_home_probability: 0.4,
            compliance_probability: 0.8,
            work_start: 51,
            work_end: 102,
            work_jitter: 6,
            school: Slot { start: 51, end: 99 },
            shop_trips_per_week: [1, 3],
            shop_duration: 4,
            friend_group_size: [3, 6],
            social_evenings_per_week: [1, 2],
            social: Slot { start: 114, end: 132 },
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PopulationError {
    #[error("no {0} building available for a required assignment")]
    MissingCategory(Category),
    #[error("invalid population configuration: {0}")]
    Config(String),
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<(), PopulationError> {
        let fail = |m: &str| Err(PopulationError::Config(m.to_string()));
        if self.count == 0 {
            return fail("count must be positive");
        }
        let a = &self.age_shares;
        let w = &self.workplace_shares;
        if [a.child, a.active, a.retired, w.industrial, w.commercial, w.educational, w.restauration]
            .iter()
            .any(|s| !(*s >= 0.0))
            || a.child + a.active + a.retired <= 0.0
        {
            return fail("shares must be non-negative with a positive total");
        }
        for p in [self.work_from_home_probability, self.compliance_probability] {
            if !(0.0..=1.0).contains(&p) {
                return fail("probabilities must lie in [0, 1]");
            }
        }
        let day = TICKS_PER_DAY;
        let slots = [self.school, self.social];
        if slots.iter().any(|s| s.start >= s.end || s.end > day)
            || self.work_start < self.work_jitter
            || self.work_end + self.work_jitter > day
            || self.work_start + self.work_jitter >= self.work_end - self.work_jitter
        {
            return fail("activity slots must lie inside one day");
        }
        if self.shop_trips_per_week[0] > self.shop_trips_per_week[1]
            || self.shop_trips_per_week[1] > 3
            || self.social_evenings_per_week[0] > self.social_evenings_per_week[1]
            || self.social_evenings_per_week[1] > 7
            || self.friend_group_size[0] == 0
            || self.friend_group_size[0] > self.friend_group_size[1]
            || self.shop_duration == 0
        {
            return fail("inconsistent weekly activity ranges");
        }
        Ok(())
    }
}

/// The residents of a town plus lookup tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub residents: Vec<Resident>,
    by_home: BTreeMap<BuildingId, Vec<ResidentId>>,
    by_workplace: BTreeMap<BuildingId, Vec<ResidentId>>,
}

impl Population {
    pub fn new(residents: Vec<Resident>) -> Self {
        let mut by_home: BTreeMap<_, Vec<_>> = BTreeMap::new();
        let mut by_workplace: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for r in &residents {
            by_home.entry(r.home).or_default().push(r.id);
            if let Some(w) = r.workplace {
                by_workplace.entry(w).or_default().push(r.id);
            }
        }
        Self { residents, by_home, by_workplace }
    }

    pub fn len(&self) -> usize {
        self.residents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residents.is_empty()
    }

    /// Other residents of the same building.
    pub fn cohabitants(&self, id: ResidentId) -> Vec<ResidentId> {
        let home = self.residents[id as usize].home;
        self.by_home[&home].iter().copied().filter(|&o| o != id).collect()
    }

    /// Other residents sharing the workplace or school.
    pub fn colleagues(&self, id: ResidentId) -> Vec<ResidentId> {
        match self.residents[id as usize].workplace {
            Some(w) => self.by_workplace[&w].iter().copied().filter(|&o| o != id).collect(),
            None => Vec::new(),
        }
    }
}

fn of_category(buildings: &[Building], category: Category) -> Vec<BuildingId> {
    buildings.iter().filter(|b| b.category == category).map(|b| b.id).collect()
}

fn pick_days(rng: &mut SimRng, allowed: DayMask, count: u32) -> DayMask {
    let mut days: Vec<u8> = (0..7).filter(|d| allowed & (1 << d) != 0).collect();
    days.shuffle(rng);
    days.iter().take(count as usize).fold(0, |m, d| m | (1 << d))
}

fn jitter(rng: &mut SimRng, centre: u32, spread: u32) -> u32 {
    if spread == 0 {
        centre
    } else {
        rng.random_range(centre - spread..=centre + spread)
    }
}

/// Draw `cfg.count` residents over `buildings`, deterministically per `seed`.
///
/// Homes are residential buildings drawn uniformly; children attend the school
/// nearest to their home; active adults work in a building of a category drawn
/// from `cfg.workplace_shares` (restricted to categories present). Only office
/// workers may work from home. Adults are partitioned into friend groups that
/// share a venue and their social evenings.
pub fn generate_population(
    buildings: &[Building],
    cfg: &PopulationConfig,
    seed: u64,
) -> Result<Population, PopulationError> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let homes = of_category(buildings, Category::Residential);
    if homes.is_empty() {
        return Err(PopulationError::MissingCategory(Category::Residential));
    }
    let schools = of_category(buildings, Category::Educational);
    let shops = of_category(buildings, Category::Commercial);
    let venues = of_category(buildings, Category::Restauration);
    let offices = of_category(buildings, Category::Industrial);

    let a = &cfg.age_shares;
    let age_total = a.child + a.active + a.retired;
    let ws = &cfg.workplace_shares;
    let job_kinds: Vec<(Category, f64, &Vec<BuildingId>)> = [
        (Category::Industrial, ws.industrial, &offices),
        (Category::Commercial, ws.commercial, &shops),
        (Category::Educational, ws.educational, &schools),
        (Category::Restauration, ws.restauration, &venues),
    ]
    .into_iter()
    .filter(|(_, w, list)| *w > 0.0 && !list.is_empty())
    .collect();
    let job_total: f64 = job_kinds.iter().map(|k| k.1).sum();

    let mut residents = Vec::with_capacity(cfg.count);
    for id in 0..cfg.count as ResidentId {
        let u = rng.random::<f64>() * age_total;
        let age_group = if u < a.child {
            AgeGroup::Child
        } else if u < a.child + a.active {
            AgeGroup::Active
        } else {
            AgeGroup::Retired
        };
        let home = *homes.choose(&mut rng).expect("non-empty");
        let compliant = rng.random::<f64>() < cfg.compliance_probability;
        let shop_preference = if rng.random::<bool>() { HalfDay::Morning } else { HalfDay::Afternoon };
        let mut agenda = Agenda { shop_preference, ..Agenda::rest() };
        let mut workplace = None;
        let mut can_work_from_home = false;

        match age_group {
            AgeGroup::Child => {
                if schools.is_empty() {
                    return Err(PopulationError::MissingCategory(Category::Educational));
                }
                let h = &buildings[home as usize];
                let nearest = schools
                    .iter()
                    .copied()
                    .min_by(|&x, &y| {
                        h.distance_sq(&buildings[x as usize])
                            .total_cmp(&h.distance_sq(&buildings[y as usize]))
                            .then(x.cmp(&y))
                    })
                    .expect("non-empty");
                workplace = Some(nearest);
                agenda.work = Some(cfg.school);
                agenda.work_days = WORKDAYS;
            }
            AgeGroup::Active => {
                if job_kinds.is_empty() {
                    return Err(PopulationError::MissingCategory(Category::Industrial));
                }
                let mut u = rng.random::<f64>() * job_total;
                let mut kind = job_kinds[job_kinds.len() - 1];
                for k in &job_kinds {
                    if u < k.1 {
                        kind = *k;
                        break;
                    }
                    u -= k.1;
                }
                workplace = Some(*kind.2.choose(&mut rng).expect("non-empty"));
                can_work_from_home =
                    kind.0 == Category::Industrial && rng.random::<f64>() < cfg.work_from_home_probability;
                let start = jitter(&mut rng, cfg.work_start, cfg.work_jitter);
                let end = jitter(&mut rng, cfg.work_end, cfg.work_jitter);
                agenda.work = Some(Slot { start, end });
                agenda.work_days = WORKDAYS;
            }
            AgeGroup::Retired => {}
        }

        let shop = if age_group != AgeGroup::Child { shops.choose(&mut rng).copied() } else { None };
        if shop.is_some() {
            let [lo, hi] = cfg.shop_trips_per_week;
            let trips = rng.random_range(lo..=hi);
            let (window, allowed) = match (age_group, shop_preference) {
                (AgeGroup::Active, HalfDay::Morning) => ((54, 72), !WORKDAYS & 0x7f),
                (AgeGroup::Active, HalfDay::Afternoon) => {
                    let after_work = agenda.work.map_or(84, |w| w.end + 1);
                    ((after_work, 114), 0x7f)
                }
                (_, HalfDay::Morning) => ((54, 72), 0x7f),
                (_, HalfDay::Afternoon) => ((84, 108), 0x7f),
            };
            let latest = window.1 - cfg.shop_duration;
            let start = if latest > window.0 { rng.random_range(window.0..=latest) } else { window.0 };
            agenda.shop = Some(Slot { start, end: start + cfg.shop_duration });
            agenda.shop_days = pick_days(&mut rng, allowed, trips);
        }

        residents.push(Resident {
            id,
            age_group,
            home,
            workplace,
            shop,
            venue: None,
            agenda,
            friends: Vec::new(),
            can_work_from_home,
            compliant,
            health: HealthState::Susceptible,
            infection_clock: 0,
        });
    }

    // friend groups among adults
    let mut adults: Vec<ResidentId> =
        residents.iter().filter(|r| r.age_group != AgeGroup::Child).map(|r| r.id).collect();
    adults.shuffle(&mut rng);
    let [gmin, gmax] = cfg.friend_group_size;
    let mut rest = adults.as_slice();
    while !rest.is_empty() {
        let size = rng.random_range(gmin..=gmax).min(rest.len());
        let (group, tail) = rest.split_at(size);
        rest = tail;
        let venue = venues.choose(&mut rng).copied();
        let [lo, hi] = cfg.social_evenings_per_week;
        let evenings = rng.random_range(lo..=hi);
        let days = pick_days(&mut rng, 0x7f, evenings);
        for &member in group {
            let r = &mut residents[member as usize];
            r.friends = group.iter().copied().filter(|&o| o != member).collect();
            r.venue = venue;
            if venue.is_some() && size > 1 {
                r.agenda.social = Some(cfg.social);
                r.agenda.social_days = days;
            }
        }
    }

    Ok(Population::new(residents))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::town::{synthetic_layout, LayoutCounts};

    fn town() -> Vec<Building> {
        synthetic_layout(&LayoutCounts::default(), 1)
    }

    #[test]
    fn deterministic_per_seed() {
        let b = town();
        let cfg = PopulationConfig { count: 300, ..Default::default() };
        let p1 = generate_population(&b, &cfg, 9).unwrap();
        let p2 = generate_population(&b, &cfg, 9).unwrap();
        assert_eq!(p1, p2);
        let p3 = generate_population(&b, &cfg, 10).unwrap();
        assert_ne!(p1, p3);
    }

    #[test]
    fn structural_invariants() {
        let b = town();
        let pop = generate_population(&b, &PopulationConfig::default(), 5).unwrap();
        assert_eq!(pop.len(), 2143);
        for r in &pop.residents {
            assert_eq!(b[r.home as usize].category, Category::Residential);
            match r.age_group {
                AgeGroup::Child => {
                    assert_eq!(b[r.workplace.unwrap() as usize].category, Category::Educational);
                    assert!(r.shop.is_none());
                }
                AgeGroup::Retired => assert!(r.workplace.is_none() && r.agenda.work.is_none()),
                AgeGroup::Active => {
                    let cat = b[r.workplace.unwrap() as usize].category;
                    assert!(cat != Category::Residential);
                    if r.can_work_from_home {
                        assert_eq!(cat, Category::Industrial);
                    }
                }
            }
            for &f in &r.friends {
                assert!(pop.residents[f as usize].friends.contains(&r.id), "friendship symmetric");
            }
            for slot in [r.agenda.work, r.agenda.shop, r.agenda.social].into_iter().flatten() {
                assert!(slot.start < slot.end && slot.end <= TICKS_PER_DAY);
            }
            assert_eq!(r.health, HealthState::Susceptible);
            assert_eq!(r.infection_clock, 0);
        }
        let id = pop.residents[0].id;
        assert!(!pop.cohabitants(id).contains(&id));
    }

    #[test]
    fn degenerate_compliance() {
        let b = town();
        let cfg = PopulationConfig { count: 200, compliance_probability: 1.0, ..Default::default() };
        let pop = generate_population(&b, &cfg, 2).unwrap();
        assert!(pop.residents.iter().all(|r| r.compliant));
    }

    #[test]
    fn missing_categories() {
        let b: Vec<Building> = town().into_iter().filter(|b| b.category != Category::Educational).collect();
        let b: Vec<Building> = b.into_iter().enumerate().map(|(i, mut x)| { x.id = i as u32; x }).collect();
        let err = generate_population(&b, &PopulationConfig { count: 100, ..Default::default() }, 1).unwrap_err();
        assert_eq!(err, PopulationError::MissingCategory(Category::Educational));

        let only_homes: Vec<Building> =
            town().into_iter().filter(|b| b.category == Category::Residential).take(5).enumerate()
                .map(|(i, mut x)| { x.id = i as u32; x }).collect();
        let cfg = PopulationConfig {
            count: 50,
            age_shares: Shares { child: 0.0, active: 0.0, retired: 1.0 },
            ..Default::default()
        };
        let pop = generate_population(&only_homes, &cfg, 1).unwrap();
        assert!(pop.residents.iter().all(|r| r.shop.is_none() && r.agenda.social.is_none()));
    }
}
