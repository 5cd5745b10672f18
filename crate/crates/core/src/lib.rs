//! Simulation and localisation of a gas source from a grid of chemical
//! sensors.
//!
//! A puff released at the transmitter drifts with the wind and spreads as a
//! Gaussian ([`plume`]). Each node turns the local concentration into a
//! voltage through a power-law response and a divider ([`sensor`]). Arrival
//! times are detected per node ([`detection`]), and clustered pairs of nodes
//! are solved for the source position after estimating the wind
//! ([`estimation`]). [`sigproc`] separates noise from measured traces and fits
//! noise distributions. [`harness`] runs seeded experiments and writes CSV
//! reports.
//!
//! ```
//! use gasloc::sensor::{concentration_from_voltage, voltage_from_concentration, SensitivityParams};
//!
//! let sp = SensitivityParams::default();
//! let v = voltage_from_concentration(4e-4, &sp).unwrap();
//! assert!((concentration_from_voltage(v, &sp).unwrap() - 4e-4).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod numerics;
pub mod plume;
pub mod sensor;
pub mod sigproc;

pub use error::{Error, Result};
