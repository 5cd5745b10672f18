//! Sensor response: concentration to normalised resistance, and the load
//! divider that turns resistance into an output voltage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{lm_fit, LmProblem};

/// Lower edge of the sensor detection scope, kg/m³.
pub const SCOPE_MIN: f64 = 5e-5;
/// Upper edge of the sensor detection scope, kg/m³.
pub const SCOPE_MAX: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityParams {
    pub a1: f64,
    pub b1: f64,
    pub d1: f64,
    /// Supply voltage of the divider, V.
    pub v_in: f64,
    /// Load resistance, Ω.
    pub r_load: f64,
    /// Sensor resistance at the reference concentration, Ω.
    pub r_o: f64,
}

impl Default for SensitivityParams {
    fn default() -> Self {
        Self {
            a1: 0.0116,
            b1: -0.5855,
            d1: -0.0743,
            v_in: 5.0,
            r_load: 1000.0,
            r_o: 24000.0,
        }
    }
}

impl SensitivityParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a1, self.b1, self.d1, self.v_in, self.r_load, self.r_o]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("sensitivity", "coefficients must be finite"));
        }
        if !(self.a1 > 0.0) {
            return Err(Error::param("a1", "must be > 0"));
        }
        if !(self.b1 < 0.0) {
            return Err(Error::param("b1", "must be < 0 for a decreasing response"));
        }
        if !(self.v_in > 0.0) {
            return Err(Error::param("v_in", "must be > 0"));
        }
        if !(self.r_load > 0.0) || !(self.r_o > 0.0) {
            return Err(Error::param("r_load/r_o", "resistances must be > 0"));
        }
        Ok(())
    }

    fn curve(&self, c: f64) -> f64 {
        self.a1 * c.powf(self.b1) + self.d1
    }

    fn divider(&self, ratio: f64) -> Result<f64> {
        let rs = self.r_o * ratio;
        if !(rs > 0.0) {
            return Err(Error::ModelDomain(format!(
                "sensor resistance {rs:e} Ω is not positive"
            )));
        }
        Ok(self.v_in * self.r_load / (self.r_load + rs))
    }
}

fn check_scope(c: f64) -> Result<()> {
    if !(SCOPE_MIN..=SCOPE_MAX).contains(&c) {
        return Err(Error::OutOfScope(c));
    }
    Ok(())
}

/// Normalised sensor resistance `R_s/R_o` at concentration `c`.
pub fn sensitivity_forward(c: f64, sp: &SensitivityParams) -> Result<f64> {
    check_scope(c)?;
    Ok(sp.curve(c))
}

pub fn voltage_from_concentration(c: f64, sp: &SensitivityParams) -> Result<f64> {
    sp.divider(sensitivity_forward(c, sp)?)
}

/// Inverts the divider and the response curve for an observed voltage.
pub fn concentration_from_voltage(gamma: f64, sp: &SensitivityParams) -> Result<f64> {
    if !(gamma > 0.0 && gamma < sp.v_in) {
        return Err(Error::param(
            "gamma",
            format!("voltage must lie in (0, {}), got {gamma}", sp.v_in),
        ));
    }
    let num = sp.v_in * sp.r_load - gamma * sp.r_load - sp.d1 * gamma * sp.r_o;
    let base = num / (gamma * sp.r_o * sp.a1);
    if !(base > 0.0) || !base.is_finite() {
        return Err(Error::InversionDomain { gamma, base });
    }
    Ok(base.powf(1.0 / sp.b1))
}

/// Divider output for the response curve followed at any positive
/// concentration, with no saturation.
pub fn sensed_voltage_unclamped(c: f64, sp: &SensitivityParams) -> f64 {
    if !(c > 0.0) {
        return 0.0;
    }
    let ratio = sp.curve(c);
    if ratio.is_infinite() {
        return 0.0;
    }
    if !(ratio > 0.0) {
        return sp.v_in;
    }
    sp.v_in * sp.r_load / (sp.r_load + sp.r_o * ratio)
}

/// Voltage a physical sensor reports at concentration `c`.
///
/// Above the scope the output saturates at the scope maximum. Below it the
/// response curve is followed down towards zero, and zero concentration
/// yields exactly zero volts.
pub fn sensed_voltage(c: f64, sp: &SensitivityParams) -> f64 {
    sensed_voltage_unclamped(c.min(SCOPE_MAX), sp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityFit {
    pub a1: f64,
    pub b1: f64,
    pub d1: f64,
    pub rmse: f64,
    pub iterations: usize,
}

impl SensitivityFit {
    /// Fitted curve attached to the circuit values of `circuit`.
    pub fn with_circuit(&self, circuit: &SensitivityParams) -> SensitivityParams {
        SensitivityParams {
            a1: self.a1,
            b1: self.b1,
            d1: self.d1,
            ..*circuit
        }
    }
}

/// Least-squares fit for `(a, d)` with the exponent held fixed.
fn linear_for_exponent(points: &[(f64, f64)], b: f64) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let (mut su, mut suu, mut sy, mut suy) = (0.0, 0.0, 0.0, 0.0);
    for &(c, y) in points {
        let u = c.powf(b);
        su += u;
        suu += u * u;
        sy += y;
        suy += u * y;
    }
    let det = n * suu - su * su;
    if det.abs() <= f64::EPSILON * n * suu {
        return (0.0, sy / n, f64::INFINITY);
    }
    let a = (n * suy - su * sy) / det;
    let d = (sy - a * su) / n;
    let sse = points
        .iter()
        .map(|&(c, y)| (a * c.powf(b) + d - y).powi(2))
        .sum();
    (a, d, sse)
}

/// Fits `a·C^b + d` to `(C, R_s/R_o)` points.
pub fn fit_sensitivity(points: &[(f64, f64)]) -> Result<SensitivityFit> {
    if points.len() < 4 {
        return Err(Error::param("points", "at least four points are required"));
    }
    if points
        .iter()
        .any(|&(c, y)| !(c > 0.0) || !c.is_finite() || !y.is_finite())
    {
        return Err(Error::param(
            "points",
            "concentrations must be positive and finite",
        ));
    }

    // Profile the exponent on a coarse grid to land LM in the right basin.
    let start = (1..=300)
        .map(|k| -0.01 * k as f64)
        .map(|b| {
            let (a, d, sse) = linear_for_exponent(points, b);
            (a, b, d, sse)
        })
        .filter(|t| t.3.is_finite())
        .min_by(|x, y| x.3.total_cmp(&y.3))
        .ok_or_else(|| Error::param("points", "data do not constrain the curve"))?;

    let problem = LmProblem::new(
        |p: &[f64]| {
            points
                .iter()
                .map(|&(c, y)| p[0] * c.powf(p[1]) + p[2] - y)
                .collect()
        },
        vec![start.0, start.1, start.2],
    )
    .max_iterations(500)
    .tolerance(1e-15);
    let fit = lm_fit(&problem)?;
    Ok(SensitivityFit {
        a1: fit.params[0],
        b1: fit.params[1],
        d1: fit.params[2],
        rmse: fit.rmse,
        iterations: fit.iterations,
    })
}
