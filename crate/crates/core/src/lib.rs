//! Simulation and measurement-analysis toolkit for quasi-phase-matched (QPM)
//! frequency-conversion waveguides.
//!
//! Units are fixed across the crate: lengths in cm (defect geometry in µm),
//! powers in W, attenuation in cm⁻¹, normalized efficiency in W⁻¹·cm⁻².
//! User-facing conversions (mm, mW, %/(W·cm²)) live in [`units`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cme;
pub mod defect;
pub mod device;
pub mod error;
pub mod fitting;
pub mod loss;
pub mod monte_carlo;
pub mod noise;
pub mod quadrature;
pub mod tuning;
pub mod units;

pub use device::{
    check_energy_conservation, external_efficiency, LossSet, ThroughputBudget, WaveguideSpec,
};
pub use error::{Error, Result};
