//! Agent-based town model at 10-minute resolution.

mod building;
mod policy;
mod population;
mod world;

pub use building::{synthetic_layout, Building, BuildingId, Category, LayoutCounts, UnknownCategory};
pub use policy::{Curfew, DiseaseConfig, Policy};
pub use population::{
    generate_population, Agenda, AgeGroup, DayMask, HalfDay, HealthState, Population, PopulationConfig,
    PopulationError, Resident, ResidentId, Shares, Slot, WorkplaceShares, WORKDAYS,
};
pub use world::{
    current_destination, infect, infection_probability, infection_update, progress_disease, run, Clock, Counts, TownError, TownTrajectory,
    World,
};

/// Ten-minute ticks.
pub const TICKS_PER_DAY: u32 = 144;
