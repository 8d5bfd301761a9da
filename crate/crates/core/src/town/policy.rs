use serde::{Deserialize, Serialize};

use super::TICKS_PER_DAY;

/// Hours `[start, end)` of the day, in ticks; wraps around midnight when
/// `start > end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curfew {
    pub start: u32,
    pub end: u32,
}

impl Curfew {
    pub fn contains(&self, tick_of_day: u32) -> bool {
        if self.start <= self.end {
            tick_of_day >= self.start && tick_of_day < self.end
        } else {
            tick_of_day >= self.start || tick_of_day < self.end
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Sanitary rules in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    /// Workers able to work from home do so during work hours.
    #[serde(default)]
    pub lockdown: bool,
    /// Only home and workplace are reachable during the curfew.
    #[serde(default)]
    pub curfew: Option<Curfew>,
    /// Pubs and restaurants closed: no socialising there, staff stay home.
    #[serde(default)]
    pub restauration_closed: bool,
    #[serde(default = "yes")]
    pub schools_open: bool,
    /// Per-contact infection probability factor for a compliant susceptible.
    #[serde(default = "one")]
    pub compliant_susceptibility: f64,
    /// Per-contact infection probability factor for a compliant infectious agent.
    #[serde(default = "one")]
    pub compliant_infectiousness: f64,
}

fn yes() -> bool {
    true
}

impl Policy {
    /// No restrictions and no protective behaviour.
    pub fn open() -> Self {
        Self {
            lockdown: false,
            curfew: None,
            restauration_closed: false,
            schools_open: true,
            compliant_susceptibility: 1.0,
            compliant_infectiousness: 1.0,
        }
    }

    /// Autumn 2020 lockdown: remote work where possible, pubs and restaurants
    /// closed, schools open, distancing and masks for compliant agents.
    pub fn lockdown() -> Self {
        Self {
            lockdown: true,
            curfew: None,
            restauration_closed: true,
            schools_open: true,
            compliant_susceptibility: 0.5,
            compliant_infectiousness: 0.5,
        }
    }

    /// Restrictions lifted apart from an evening curfew (20:00–06:00).
    pub fn lifted() -> Self {
        Self {
            lockdown: false,
            curfew: Some(Curfew { start: 20 * 6, end: 6 * 6 }),
            restauration_closed: false,
            schools_open: true,
            compliant_susceptibility: 0.5,
            compliant_infectiousness: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, m) in [
            ("compliant_susceptibility", self.compliant_susceptibility),
            ("compliant_infectiousness", self.compliant_infectiousness),
        ] {
            if !(m > 0.0 && m <= 1.0) {
                return Err(format!("{name} must lie in (0, 1], got {m}"));
            }
        }
        if let Some(c) = self.curfew {
            if c.start >= TICKS_PER_DAY || c.end >= TICKS_PER_DAY || c.start == c.end {
                return Err(format!("curfew ticks must be distinct and below {TICKS_PER_DAY}"));
            }
        }
        Ok(())
    }

    pub fn curfew_active(&self, tick_of_day: u32) -> bool {
        self.curfew.is_some_and(|c| c.contains(tick_of_day))
    }
}

fn default_transmission() -> f64 {
    0.00008
}
fn default_asymptomatic() -> f64 {
    0.4
}
fn default_mean_days() -> f64 {
    8.0
}
fn default_spread_days() -> f64 {
    3.0
}
fn default_cap() -> Option<usize> {
    Some(15)
}

/// Infection parameters.
///
/// The defaults are calibration targets, not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiseaseConfig {
    /// Probability that one infectious co-occupant infects a susceptible
    /// during one 10-minute tick, before compliance factors.
    #[serde(default = "default_transmission")]
    pub transmission_probability: f64,
    #[serde(default = "default_asymptomatic")]
    pub asymptomatic_fraction: f64,
    /// Infectious period is uniform on `[mean − spread, mean + spread]` days.
    #[serde(default = "default_mean_days")]
    pub mean_infectious_days: f64,
    #[serde(default = "default_spread_days")]
    pub spread_days: f64,
    /// Ignore compliance factors when both agents live in the building.
    #[serde(default = "yes")]
    pub no_precautions_at_home: bool,
    /// At most this many infectious occupants count as contacts of one
    /// susceptible per tick; `None` is full mixing.
    #[serde(default = "default_cap")]
    pub contact_cap: Option<usize>,
}

impl Default for DiseaseConfig {
    fn default() -> Self {
        Self {
            transmission_probability: default_transmission(),
            asymptomatic_fraction: default_asymptomatic(),
            mean_infectious_days: default_mean_days(),
            spread_days: default_spread_days(),
            no_precautions_at_home: true,
            contact_cap: default_cap(),
        }
    }
}

impl DiseaseConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("transmission_probability", self.transmission_probability),
            ("asymptomatic_fraction", self.asymptomatic_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.spread_days >= 0.0) || !(self.mean_infectious_days - self.spread_days > 0.0) {
            return Err("infectious duration must stay positive: need 0 <= spread < mean".into());
        }
        if self.contact_cap == Some(0) {
            return Err("contact_cap must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curfew_wraps_midnight() {
        let c = Curfew { start: 120, end: 36 };
        assert!(c.contains(130) && c.contains(0) && c.contains(35));
        assert!(!c.contains(36) && !c.contains(119));
        let d = Curfew { start: 60, end: 90 };
        assert!(d.contains(60) && !d.contains(90) && !d.contains(10));
    }

    #[test]
    fn validation() {
        assert!(Policy::lockdown().validate().is_ok());
        let mut p = Policy::open();
        p.compliant_infectiousness = 0.0;
        assert!(p.validate().is_err());
        let mut d = DiseaseConfig::default();
        assert!(d.validate().is_ok());
        d.spread_days = d.mean_infectious_days;
        assert!(d.validate().is_err());
    }
}
