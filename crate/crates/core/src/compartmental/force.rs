use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("damping function must be positive, got f({infected}) = {value}")]
pub struct ForceError {
    pub infected: f64,
    pub value: f64,
}

/// Nonlinear infection force `λ·I / f(I)`.
///
/// With `f ≡ 1` this is the usual linear force `λ·I`.
pub fn saturating_force(
    lambda: f64,
    damping: impl Fn(f64) -> f64,
    infected: f64,
) -> Result<f64, ForceError> {
    let value = damping(infected);
    if !(value > 0.0) {
        return Err(ForceError { infected, value });
    }
    Ok(lambda * infected / value)
}

/// Damping function `f` in the infection force.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Damping {
    /// `f ≡ 1`
    #[default]
    Identity,
    /// `f(I) = 1 + α·I`
    Saturating { alpha: f64 },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Damping {
    pub fn eval(&self, infected: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Saturating { alpha } => 1.0 + alpha * infected,
            Self::Custom(f) => f(infected),
        }
    }

    /// Force per unit λ, i.e. `I / f(I)`.
    pub fn force(&self, infected: f64) -> Result<f64, ForceError> {
        match self {
            Self::Identity => Ok(infected),
            _ => saturating_force(1.0, |i| self.eval(i), infected),
        }
    }
}

impl fmt::Debug for Damping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Saturating { alpha } => f.debug_struct("Saturating").field("alpha", alpha).finish(),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PartialEq for Damping {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Identity, Self::Identity) => true,
            (Self::Saturating { alpha: a }, Self::Saturating { alpha: b }) => a == b,
            (Self::Custom(a), Self::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_damping_is_linear() {
        assert_eq!(saturating_force(0.4, |_| 1.0, 2.0).unwrap(), 0.8);
    }

    #[test]
    fn no_infected_no_force() {
        assert_eq!(saturating_force(3.0, |i| 1.0 + 5.0 * i, 0.0).unwrap(), 0.0);
        assert_eq!(Damping::Saturating { alpha: 2.0 }.force(0.0).unwrap(), 0.0);
    }

    #[test]
    fn one_plus_alpha_i() {
        let d = Damping::Saturating { alpha: 1.0 };
        assert_eq!(saturating_force(1.0, |i| d.eval(i), 1.0).unwrap(), 0.5);
    }

    #[test]
    fn non_positive_damping_is_a_domain_error() {
        assert!(saturating_force(1.0, |_| 0.0, 1.0).is_err());
        assert!(saturating_force(1.0, |_| f64::NAN, 1.0).is_err());
        let d = Damping::Custom(Arc::new(|i| 1.0 - i));
        assert_eq!(d.force(2.0), Err(ForceError { infected: 2.0, value: -1.0 }));
    }
}
