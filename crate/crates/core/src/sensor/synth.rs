//! Synthetic sensor voltages: puff signal through the sensor response, plus
//! a per-node offset and heavy-tailed additive noise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{NodeId, SensorGrid};
use super::sensitivity::{sensed_voltage, SensitivityParams};
use crate::error::{Error, Result};
use crate::numerics::{rng_for, StudentT};
use crate::plume::{sensor_concentration, PlumeParams, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Student's t degrees of freedom.
    pub nu: f64,
    /// Scale of the t noise, V. Zero disables noise.
    pub noise_scale: f64,
    /// Baseline sensor output without analyte, V.
    pub offset: f64,
    /// Half-width of the uniform per-node spread around `offset`, V.
    pub offset_spread: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            nu: 1.43,
            noise_scale: 0.005,
            offset: 0.1,
            offset_spread: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless(offset: f64) -> Self {
        Self {
            noise_scale: 0.0,
            offset,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::param("nu", "must be > 0"));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::param("noise_scale", "must be >= 0"));
        }
        if !(self.offset_spread >= 0.0) || !(self.offset - self.offset_spread >= 0.0) {
            return Err(Error::param("offset", "offset minus spread must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub node: NodeId,
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl Trace {
    pub fn new(node: NodeId, samples: Vec<f64>, sample_rate: f64) -> Self {
        Self {
            node,
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Time stamp of sample `n` (0-based). The first sample is taken one
    /// interval after the release.
    pub fn time(&self, n: usize) -> f64 {
        (n + 1) as f64 / self.sample_rate
    }
}

/// Separate parts of one synthesised trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceComponents {
    pub node: NodeId,
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
    pub offset: f64,
    pub sample_rate: f64,
}

impl TraceComponents {
    /// Sum of the parts, clamped to the supply range.
    pub fn compose(&self, v_in: f64) -> Trace {
        let samples = self
            .signal
            .iter()
            .zip(&self.noise)
            .map(|(s, w)| (s + w + self.offset).clamp(0.0, v_in))
            .collect();
        Trace::new(self.node, samples, self.sample_rate)
    }
}

fn sample_count(sample_rate: f64, duration: f64) -> Result<usize> {
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::param("sample_rate", "must be > 0"));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::param("duration", "must be >= 0"));
    }
    Ok((duration * sample_rate).round() as usize)
}

fn node_stream(node: NodeId) -> u64 {
    ((node.row as u64) << 32) | node.col as u64
}

/// Builds the signal, noise and offset for a single node.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_trace_components(
    node: NodeId,
    position: Point2,
    plume: &PlumeParams,
    noise: &NoiseModel,
    sp: &SensitivityParams,
    sample_rate: f64,
    duration: f64,
    seed: u64,
) -> Result<TraceComponents> {
    plume.validate()?;
    noise.validate()?;
    sp.validate()?;
    let n = sample_count(sample_rate, duration)?;

    let signal = (0..n)
        .map(|k| {
            let t = (k + 1) as f64 / sample_rate;
            sensor_concentration(plume, position, t).map(|c| sensed_voltage(c, sp))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut rng = rng_for(seed, node_stream(node));
    let offset = if noise.offset_spread > 0.0 {
        noise.offset + noise.offset_spread * rng.random_range(-1.0..=1.0)
    } else {
        noise.offset
    };
    let noise_samples = if noise.noise_scale > 0.0 {
        let dist = StudentT::new(noise.nu, noise.noise_scale)?;
        (0..n).map(|_| dist.draw(&mut rng)).collect()
    } else {
        vec![0.0; n]
    };

    Ok(TraceComponents {
        node,
        signal,
        noise: noise_samples,
        offset,
        sample_rate,
    })
}

/// One trace per occupied grid node, in grid order.
pub fn synthesize_traces(
    grid: &SensorGrid,
    plume: &PlumeParams,
    noise: &NoiseModel,
    sp: &SensitivityParams,
    sample_rate: f64,
    duration: f64,
    seed: u64,
) -> Result<Vec<Trace>> {
    grid.nodes()
        .par_iter()
        .map(|&node| {
            synthesize_trace_components(
                node,
                grid.position(node),
                plume,
                noise,
                sp,
                sample_rate,
                duration,
                seed,
            )
            .map(|parts| parts.compose(sp.v_in))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plume::{Point3, Sigma, Wind};

    fn plume(mass: f64) -> PlumeParams {
        PlumeParams {
            mass,
            source: Point3::new(0.3, 0.3, 0.0),
            wind: Wind::new(-0.03, 0.0),
            sigma: Sigma::TABLE,
        }
    }

    #[test]
    fn no_mass_no_noise_is_flat_offset() {
        let grid = SensorGrid::standard();
        let traces = synthesize_traces(
            &grid,
            &plume(0.0),
            &NoiseModel::noiseless(0.1),
            &SensitivityParams::default(),
            10.0,
            180.0,
            1,
        )
        .unwrap();
        assert_eq!(traces.len(), 24);
        for t in &traces {
            assert_eq!(t.len(), 1800);
            assert!(t.samples.iter().all(|&v| v == 0.1));
        }
    }

    #[test]
    fn noiseless_peak_matches_concentration_argmax() {
        // Small enough that the peak stays below sensor saturation.
        let p = plume(1e-8);
        let node = NodeId::new(3, 2);
        let pos = SensorGrid::standard().position(node);
        let parts = synthesize_trace_components(
            node,
            pos,
            &p,
            &NoiseModel::noiseless(0.1),
            &SensitivityParams::default(),
            10.0,
            30.0,
            9,
        )
        .unwrap();
        let trace = parts.compose(5.0);
        // Brute-force argmax over a ten times denser time grid.
        let dense_peak = (1..=3000)
            .map(|k| k as f64 * 0.01)
            .max_by(|&a, &b| {
                let ca = sensor_concentration(&p, pos, a).unwrap();
                let cb = sensor_concentration(&p, pos, b).unwrap();
                ca.total_cmp(&cb)
            })
            .unwrap();
        let idx = trace
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((trace.time(idx) - dense_peak).abs() <= 0.5 * trace.dt() + 1e-9);
    }

    #[test]
    fn seeded_traces_repeat() {
        let grid = SensorGrid::standard();
        let make = |seed| {
            synthesize_traces(
                &grid,
                &plume(1.6e-7),
                &NoiseModel::default(),
                &SensitivityParams::default(),
                10.0,
                20.0,
                seed,
            )
            .unwrap()
        };
        assert_eq!(make(5), make(5));
        assert_ne!(make(5), make(6));
    }

    #[test]
    fn noisy_samples_stay_in_supply_range() {
        let grid = SensorGrid::standard();
        let noise = NoiseModel {
            noise_scale: 0.5,
            offset_spread: 0.05,
            ..NoiseModel::default()
        };
        let traces = synthesize_traces(
            &grid,
            &plume(1e-5),
            &noise,
            &SensitivityParams::default(),
            10.0,
            60.0,
            3,
        )
        .unwrap();
        for t in traces {
            assert!(t.samples.iter().all(|&v| (0.0..=5.0).contains(&v)));
        }
    }

    #[test]
    fn invalid_noise_model() {
        assert!(NoiseModel {
            nu: 0.0,
            ..NoiseModel::default()
        }
        .validate()
        .is_err());
        assert!(NoiseModel {
            noise_scale: -1.0,
            ..NoiseModel::default()
        }
        .validate()
        .is_err());
        assert!(NoiseModel {
            offset_spread: 0.2,
            ..NoiseModel::default()
        }
        .validate()
        .is_err());
    }
}
