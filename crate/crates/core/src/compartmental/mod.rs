//! Compartmental epidemic models.
//!
//! Two systems are provided: the four-compartment SIRD model and the
//! eight-compartment model separating undetected (`I⁻`) from detected (`I⁺`)
//! infections together with hospital (`H`) and intensive care (`U`) occupancy.
//! Both are integrated with the fixed-step RK4 scheme in [`ode`].

mod beta;
mod charpentier;
mod force;
pub mod ode;
mod sird;

pub use beta::{BetaSchedule, ScheduleError};
pub use charpentier::{charp_rhs, CharpModel, CharpParams, CharpState};
pub use force::{saturating_force, Damping, ForceError};
pub use ode::{integrate, rk4_step, OdeError, Trajectory};
pub use sird::{r0, sird_rhs, R0Error, SirdModel, SirdParams, SirdState};

use std::fmt::Debug;

/// Default integration step, in days.
pub const DEFAULT_DT: f64 = 0.05;

/// A fixed-size vector of compartment occupancies.
pub trait State: Copy + Debug + PartialEq + Send + Sync {
    /// Short model tag written into trajectories.
    const MODEL: &'static str;
    /// Column labels, in component order.
    const LABELS: &'static [&'static str];

    fn from_fn(f: impl FnMut(usize) -> f64) -> Self;
    fn component(&self, i: usize) -> f64;

    fn dim() -> usize {
        Self::LABELS.len()
    }

    fn zip_with(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self::from_fn(|i| f(self.component(i), other.component(i)))
    }

    fn components(&self) -> Vec<f64> {
        (0..Self::dim()).map(|i| self.component(i)).collect()
    }

    fn total(&self) -> f64 {
        (0..Self::dim()).map(|i| self.component(i)).sum()
    }

    fn is_finite(&self) -> bool {
        (0..Self::dim()).all(|i| self.component(i).is_finite())
    }

    fn min_component(&self) -> f64 {
        (0..Self::dim())
            .map(|i| self.component(i))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A right-hand side `dy/dt = f(y, t)`.
pub trait OdeSystem {
    type State: State;

    fn rhs(&self, state: &Self::State, t: f64) -> Self::State;
}

macro_rules! compartments {
    (
        $(#[$meta:meta])*
        $name:ident, $tag:literal { $($field:ident => $label:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
        pub struct $name {
            $(pub $field: f64,)+
        }

        impl $crate::compartmental::State for $name {
            const MODEL: &'static str = $tag;
            const LABELS: &'static [&'static str] = &[$($label),+];

            fn from_fn(mut f: impl FnMut(usize) -> f64) -> Self {
                let mut _i = 0usize;
                $(
                    let $field = f(_i);
                    _i += 1;
                )+
                Self { $($field),+ }
            }

            fn component(&self, i: usize) -> f64 {
                let fields = [$(self.$field),+];
                fields[i]
            }
        }
    };
}
pub(crate) use compartments;
