//! Multi-scale COVID-19 epidemic toolkit.
//!
//! The crate is organised by scale:
//!
//! - [`compartmental`]: SIRD and eight-compartment (Charpentier) ODE models with a
//!   fixed-step RK4 integrator.
//! - [`estimation`]: sliding-horizon Gauss-Newton fitting of the transmission and
//!   detection rates against hospital observations.
//! - [`town`]: a seeded agent-based simulation of a small town at 10-minute
//!   resolution.
//! - [`coupling`]: projection of regional curves onto the town, exhaustive-search
//!   calibration, replicate ensembles, policy switches and effective-β extraction.
//! - [`io`]: CSV, GeoJSON, SVG and experiment-configuration handling.
//!
//! Range checks are written `!(x >= 0.0)` so that NaN fails them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compartmental;
pub mod coupling;
pub mod estimation;
pub mod io;
pub mod rng;
pub mod town;
