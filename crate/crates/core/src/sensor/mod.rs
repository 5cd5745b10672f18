//! Sensor lattice, the resistive sensor model and synthetic trace generation.

pub mod grid;
pub mod sensitivity;
pub mod synth;

pub use grid::{NodeId, SensorGrid};
pub use sensitivity::{
    concentration_from_voltage, fit_sensitivity, sensed_voltage, sensed_voltage_unclamped,
    sensitivity_forward, voltage_from_concentration, SensitivityFit, SensitivityParams, SCOPE_MAX,
    SCOPE_MIN,
};
pub use synth::{
    synthesize_trace_components, synthesize_traces, NoiseModel, Trace, TraceComponents,
};
