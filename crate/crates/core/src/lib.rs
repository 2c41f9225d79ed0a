//! Passive tracer with a mean gradient, advected by a stochastic zonal
//! cross-sweep and a spectral shear flow on a periodic channel.
//!
//! The crate covers the zonal flow models and their stationary densities
//! ([`zonal`]), the per-wavenumber shear coefficients ([`shear`]), time
//! integration of the coupled system with exact-solution oracles
//! ([`integrator`]), and the stationary tracer statistics ([`statistics`]).

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod integrator;
pub mod presets;
pub mod rng;
pub mod shear;
pub mod statistics;
pub mod zonal;

pub use config::{
    build_mode_table, validate_config, ExperimentConfig, ShearKind, ShearSpec, SpectrumKind, SpectrumSpec,
    TracerSpec, ValidationReport, ZonalKind, ZonalSpec,
};
pub use error::{Error, Result};
pub use integrator::{NoiseScheme, SystemState, TrajectoryRecord};
pub use shear::{ModeCoefficients, ModeTable};
pub use statistics::StationaryPdf;
pub use zonal::ZonalStationaryPdf;
