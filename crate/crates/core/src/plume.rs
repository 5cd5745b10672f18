//! Gaussian puff transport of an instantaneous release advected by a uniform
//! wind over a reflecting ground plane.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn planar(self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Horizontal wind velocity in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wind {
    pub ux: f64,
    pub uy: f64,
}

impl Wind {
    pub const fn new(ux: f64, uy: f64) -> Self {
        Self { ux, uy }
    }

    pub fn speed(self) -> f64 {
        self.ux.hypot(self.uy)
    }
}

/// Standard deviations of the puff along each axis, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Sigma {
    pub const TABLE: Sigma = Sigma {
        x: 0.0115,
        y: 0.0115,
        z: 0.0046,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_x", self.x),
            ("sigma_y", self.y),
            ("sigma_z", self.z),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn product(&self) -> f64 {
        self.x * self.y * self.z
    }
}

impl Default for Sigma {
    fn default() -> Self {
        Self::TABLE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlumeParams {
    /// Released mass in kg.
    pub mass: f64,
    pub source: Point3,
    pub wind: Wind,
    pub sigma: Sigma,
}

impl PlumeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass >= 0.0) || !self.mass.is_finite() {
            return Err(Error::param(
                "mass",
                format!("must be >= 0, got {}", self.mass),
            ));
        }
        self.sigma.validate()
    }

    /// Horizontal position of the puff centre at time `t`.
    pub fn center_at(&self, t: f64) -> Point2 {
        Point2::new(
            self.source.x + self.wind.ux * t,
            self.source.y + self.wind.uy * t,
        )
    }

    fn horizontal_exponent(&self, at: Point2, t: f64) -> f64 {
        let c = self.center_at(t);
        let dx = at.x - c.x;
        let dy = at.y - c.y;
        -dx * dx / (2.0 * self.sigma.x * self.sigma.x)
            - dy * dy / (2.0 * self.sigma.y * self.sigma.y)
    }
}

/// Turbulent diffusivities along each axis, in m²/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusivityParams {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
}

impl DiffusivityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_x", self.kx), ("k_y", self.ky), ("k_z", self.kz)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Puff widths reached after diffusing for `t` seconds: `σ² = 2Kt`.
    pub fn sigma_at(&self, t: f64) -> Sigma {
        Sigma::new(
            (2.0 * self.kx * t).sqrt(),
            (2.0 * self.ky * t).sqrt(),
            (2.0 * self.kz * t).sqrt(),
        )
    }
}

/// Briggs dispersion widths for stable air at distance `r` metres from the
/// source. Returns `(σ_y, σ_z)`; `σ_x` is conventionally taken equal to `σ_y`.
pub fn briggs_sigma(r: f64) -> Result<(f64, f64)> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::param("r", format!("distance must be >= 0, got {r}")));
    }
    let sy = 0.04 * r / (1.0 + 0.0001 * r).sqrt();
    let sz = 0.016 * r / (1.0 + 0.0003 * r);
    Ok((sy, sz))
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("time must be > 0, got {t}")));
    }
    Ok(())
}

/// Full three-dimensional puff with the ground-reflection image term.
pub fn puff_concentration_3d(p: &PlumeParams, at: Point3, t: f64) -> Result<f64> {
    check_time(t)?;
    p.validate()?;
    let s = &p.sigma;
    let norm = p.mass / ((2.0 * PI).powf(1.5) * s.product());
    let two_sz2 = 2.0 * s.z * s.z;
    let vertical = (-(at.z - p.source.z).powi(2) / two_sz2).exp()
        + (-(at.z + p.source.z).powi(2) / two_sz2).exp();
    Ok(norm * p.horizontal_exponent(at.planar(), t).exp() * vertical)
}

/// The same puff written in terms of diffusivities, with the widths growing
/// as `√(2Kt)`.
pub fn puff_concentration_diffusive(
    mass: f64,
    source: Point3,
    wind: Wind,
    k: &DiffusivityParams,
    at: Point3,
    t: f64,
) -> Result<f64> {
    check_time(t)?;
    k.validate()?;
    let p = PlumeParams {
        mass,
        source,
        wind,
        sigma: k.sigma_at(t),
    };
    puff_concentration_3d(&p, at, t)
}

/// Ground-level concentration seen by a sensor at `node` at time `t`, with
/// source and sensor both on the `z = 0` plane.
pub fn sensor_concentration(p: &PlumeParams, node: Point2, t: f64) -> Result<f64> {
    check_time(t)?;
    p.validate()?;
    let norm = p.mass / ((2.0 * PI.powi(3)).sqrt() * p.sigma.product());
    Ok(norm * p.horizontal_exponent(node, t).exp())
}
