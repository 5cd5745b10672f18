//! Per-node detection of the puff arrival.
//!
//! Two schemes are available. The amplitude scheme smooths the trace with a
//! causal moving average and fires when it exceeds the offset plus a fixed
//! margin. The energy scheme accumulates the energy that the offset-free
//! voltage dissipates in the load resistor and fires once it reaches a
//! budget.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mean;
use crate::sensor::{NodeId, Trace};

/// Relative slack applied to the energy budget so that a cumulative sum
/// landing on the threshold up to round-off still counts as reaching it.
const ENERGY_TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Amplitude,
    Energy,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Amplitude => "amplitude",
            Scheme::Energy => "energy",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "amplitude" => Ok(Scheme::Amplitude),
            "energy" => Ok(Scheme::Energy),
            other => Err(format!(
                "unknown scheme `{other}` (expected amplitude or energy)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub scheme: Scheme,
    /// Margin above the offset for the amplitude scheme, V.
    pub amplitude_threshold: f64,
    /// Energy budget for the energy scheme, J.
    pub energy_threshold: f64,
    /// Moving-average window, samples.
    pub window: usize,
    /// Number of leading samples averaged for the offset.
    pub offset_window: usize,
    /// Load resistance, Ω.
    pub r_load: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Energy,
            amplitude_threshold: 0.05,
            energy_threshold: 4.3e-3,
            window: 7,
            offset_window: 50,
            r_load: 1000.0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::param("window", "must be >= 1"));
        }
        if self.offset_window < 1 {
            return Err(Error::param("offset_window", "must be >= 1"));
        }
        if !(self.r_load > 0.0) || !self.r_load.is_finite() {
            return Err(Error::param("r_load", "must be > 0"));
        }
        let (name, value) = match self.scheme {
            Scheme::Amplitude => ("amplitude_threshold", self.amplitude_threshold),
            Scheme::Energy => ("energy_threshold", self.energy_threshold),
        };
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::param(name, format!("must be >= 0, got {value}")));
        }
        Ok(())
    }

    /// The threshold used by the active scheme.
    pub fn threshold(&self) -> f64 {
        match self.scheme {
            Scheme::Amplitude => self.amplitude_threshold,
            Scheme::Energy => self.energy_threshold,
        }
    }

    pub fn with_threshold(mut self, value: f64) -> Self {
        match self.scheme {
            Scheme::Amplitude => self.amplitude_threshold = value,
            Scheme::Energy => self.energy_threshold = value,
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    pub node: NodeId,
    pub detected: bool,
    /// Detection time, s. NaN when nothing was detected.
    pub t: f64,
    /// Detection voltage, V. NaN when nothing was detected.
    pub gamma: f64,
    /// Estimated offset, V.
    pub rho_o: f64,
}

impl DetectionResult {
    pub fn missed(node: NodeId, rho_o: f64) -> Self {
        Self {
            node,
            detected: false,
            t: f64::NAN,
            gamma: f64::NAN,
            rho_o,
        }
    }
}

/// Mean of the first `p` samples.
pub fn estimate_offset(trace: &Trace, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::param("offset_window", "must be >= 1"));
    }
    if trace.len() < p {
        return Err(Error::param(
            "offset_window",
            format!(
                "trace for {} has {} samples, need {p}",
                trace.node,
                trace.len()
            ),
        ));
    }
    Ok(mean(&trace.samples[..p]))
}

/// Causal `window`-point running mean. Samples before the start are taken
/// equal to the first sample.
pub fn moving_average(samples: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let Some(&first) = samples.first() else {
        return Vec::new();
    };
    let mut buf = vec![first; window];
    samples
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            buf[n % window] = x;
            mean(&buf)
        })
        .collect()
}

pub fn amplitude_detect(trace: &Trace, cfg: &DetectionConfig) -> Result<DetectionResult> {
    cfg.validate()?;
    let rho = estimate_offset(trace, cfg.offset_window)?;
    let gamma = rho + cfg.amplitude_threshold;
    let smoothed = moving_average(&trace.samples, cfg.window);
    Ok(match smoothed.iter().position(|&y| y >= gamma) {
        Some(n) => DetectionResult {
            node: trace.node,
            detected: true,
            t: trace.time(n),
            gamma,
            rho_o: rho,
        },
        None => DetectionResult::missed(trace.node, rho),
    })
}

/// Energy detection against a caller-supplied offset.
pub fn energy_detect_with_offset(
    trace: &Trace,
    rho: f64,
    lambda: f64,
    r_load: f64,
) -> DetectionResult {
    let scale = trace.dt() / r_load;
    let budget = lambda * (1.0 - ENERGY_TIE_RTOL);
    let mut energy = 0.0;
    for (n, &v) in trace.samples.iter().enumerate() {
        let g = v - rho;
        energy += g * g * scale;
        if energy >= budget {
            return DetectionResult {
                node: trace.node,
                detected: true,
                t: trace.time(n),
                gamma: v,
                rho_o: rho,
            };
        }
    }
    DetectionResult::missed(trace.node, rho)
}

pub fn energy_detect(trace: &Trace, cfg: &DetectionConfig) -> Result<DetectionResult> {
    cfg.validate()?;
    let rho = estimate_offset(trace, cfg.offset_window)?;
    Ok(energy_detect_with_offset(
        trace,
        rho,
        cfg.energy_threshold,
        cfg.r_load,
    ))
}

pub fn detect(trace: &Trace, cfg: &DetectionConfig) -> Result<DetectionResult> {
    match cfg.scheme {
        Scheme::Amplitude => amplitude_detect(trace, cfg),
        Scheme::Energy => energy_detect(trace, cfg),
    }
}

/// Runs the configured detector over every trace, preserving input order.
pub fn detect_all(traces: &[Trace], cfg: &DetectionConfig) -> Result<Vec<DetectionResult>> {
    traces.par_iter().map(|t| detect(t, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(samples: Vec<f64>) -> Trace {
        Trace::new(NodeId::new(1, 1), samples, 10.0)
    }

    fn amp(threshold: f64, window: usize, p: usize) -> DetectionConfig {
        DetectionConfig {
            scheme: Scheme::Amplitude,
            amplitude_threshold: threshold,
            window,
            offset_window: p,
            ..DetectionConfig::default()
        }
    }

    fn energy(lambda: f64) -> DetectionConfig {
        DetectionConfig {
            energy_threshold: lambda,
            ..DetectionConfig::default()
        }
    }

    #[test]
    fn offset_of_constant_trace() {
        assert_eq!(estimate_offset(&trace(vec![0.1; 80]), 50).unwrap(), 0.1);
    }

    #[test]
    fn offset_of_alternating_trace() {
        let s: Vec<f64> = (0..50)
            .map(|k| if k % 2 == 0 { 0.0 } else { 0.2 })
            .collect();
        assert!((estimate_offset(&trace(s), 50).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn offset_ignores_late_signal() {
        let mut s = vec![0.1; 200];
        for v in &mut s[60..] {
            *v += 0.7;
        }
        assert_eq!(estimate_offset(&trace(s), 50).unwrap(), 0.1);
    }

    #[test]
    fn offset_needs_enough_samples() {
        assert!(estimate_offset(&trace(vec![0.1; 10]), 50).is_err());
    }

    #[test]
    fn moving_average_cases() {
        assert_eq!(moving_average(&[0.3; 10], 7), vec![0.3; 10]);
        let x = [1.0, 5.0, -2.0, 4.0];
        assert_eq!(moving_average(&x, 1), x.to_vec());
        assert!(moving_average(&[], 3).is_empty());

        // Unit step at sample 5 (1-based) through a 7-point window.
        let step: Vec<f64> = (1..=15).map(|n| if n >= 5 { 1.0 } else { 0.0 }).collect();
        let y = moving_average(&step, 7);
        for n in 1..=15usize {
            let want = (n.saturating_sub(4)).min(7) as f64 / 7.0;
            assert!((y[n - 1] - want).abs() < 1e-15, "n={n}");
        }
        assert_eq!(y[10], 1.0);
        assert!(y[9] < 1.0);
    }

    #[test]
    fn moving_average_holds_first_sample_at_edge() {
        let y = moving_average(&[2.0, 4.0], 3);
        assert!((y[0] - 2.0).abs() < 1e-15);
        assert!((y[1] - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn flat_trace_is_not_detected() {
        let r = amplitude_detect(&trace(vec![0.1; 300]), &amp(0.02, 7, 50)).unwrap();
        assert!(!r.detected && r.t.is_nan());
    }

    #[test]
    fn amplitude_step_fires_on_crossing() {
        let a_t = 0.05;
        // Sample k is at (k+1)/10 s, so index 99 is t = 10 s.
        let s: Vec<f64> = (0..300)
            .map(|k| if k >= 99 { 0.1 + 2.0 * a_t } else { 0.1 })
            .collect();
        let r = amplitude_detect(&trace(s), &amp(a_t, 1, 50)).unwrap();
        assert!(r.detected);
        assert!((r.t - 10.0).abs() < 1e-12);
        assert!((r.gamma - 0.15).abs() < 1e-15);
        assert_eq!(r.rho_o, 0.1);
    }

    #[test]
    fn zero_margin_fires_at_first_sample_reaching_offset() {
        let s = vec![0.1; 100];
        let r = amplitude_detect(&trace(s), &amp(0.0, 7, 50)).unwrap();
        assert!(r.detected);
        assert!((r.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_energy_never_detects() {
        let r = energy_detect(&trace(vec![0.2; 500]), &energy(1e-9)).unwrap();
        assert!(!r.detected);
    }

    #[test]
    fn constant_excess_energy_arithmetic() {
        // g = 0.1 V into 1 kΩ for 0.1 s is 1 µJ per sample: 4.3 mJ after 4300 samples.
        let s = vec![0.1; 5000];
        let r = energy_detect_with_offset(&trace(s), 0.0, 4.3e-3, 1000.0);
        assert!(r.detected);
        assert_eq!(r.t, 430.0);
        assert_eq!(r.gamma, 0.1);
    }

    #[test]
    fn higher_energy_budget_detects_later() {
        let s: Vec<f64> = (0..2000)
            .map(|k| 0.1 + 0.3 * (k as f64 / 300.0).sin().abs())
            .collect();
        let t = trace(s);
        let a = energy_detect(&t, &energy(1e-3)).unwrap();
        let b = energy_detect(&t, &energy(2e-3)).unwrap();
        assert!(a.detected && b.detected && b.t >= a.t);
    }

    #[test]
    fn config_validation() {
        assert!(DetectionConfig::default().validate().is_ok());
        assert!(DetectionConfig {
            window: 0,
            ..DetectionConfig::default()
        }
        .validate()
        .is_err());
        assert!(DetectionConfig {
            energy_threshold: -1.0,
            ..DetectionConfig::default()
        }
        .validate()
        .is_err());
        assert!(DetectionConfig {
            energy_threshold: 0.0,
            ..DetectionConfig::default()
        }
        .validate()
        .is_ok());
        assert!(DetectionConfig {
            r_load: 0.0,
            ..DetectionConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("Energy".parse::<Scheme>().unwrap(), Scheme::Energy);
        assert_eq!("amplitude".parse::<Scheme>().unwrap(), Scheme::Amplitude);
        assert!("power".parse::<Scheme>().is_err());
        assert_eq!(Scheme::Amplitude.to_string(), "amplitude");
    }

    fn pulse_trace(height: f64, center: f64, width: f64, offset: f64) -> Trace {
        let s = (0..1200)
            .map(|k| {
                let t = (k + 1) as f64 / 10.0;
                offset + height * (-(t - center).powi(2) / (2.0 * width * width)).exp()
            })
            .collect();
        trace(s)
    }

    proptest! {
        #[test]
        fn energy_time_monotone_in_budget(
            height in 0.05f64..1.5, center in 10.0f64..100.0, width in 0.5f64..20.0,
            l1 in 0.0f64..0.015, l2 in 0.0f64..0.015,
        ) {
            let t = pulse_trace(height, center, width, 0.1);
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let a = energy_detect(&t, &energy(lo)).unwrap();
            let b = energy_detect(&t, &energy(hi)).unwrap();
            if b.detected {
                prop_assert!(a.detected && a.t <= b.t);
            }
        }

        #[test]
        fn amplitude_time_monotone_in_margin(
            height in 0.05f64..1.5, center in 10.0f64..100.0, width in 0.5f64..20.0,
            a1 in 0.0f64..0.15, a2 in 0.0f64..0.15,
        ) {
            let t = pulse_trace(height, center, width, 0.1);
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let a = amplitude_detect(&t, &amp(lo, 7, 50)).unwrap();
            let b = amplitude_detect(&t, &amp(hi, 7, 50)).unwrap();
            if b.detected {
                prop_assert!(a.detected && a.t <= b.t);
            }
        }

        #[test]
        fn energy_gamma_and_time_bounded(
            height in 0.05f64..1.5, center in 10.0f64..100.0, width in 0.5f64..20.0, lambda in 0.0f64..0.015,
        ) {
            let t = pulse_trace(height, center, width, 0.1);
            let r = energy_detect(&t, &energy(lambda)).unwrap();
            if r.detected {
                let max = t.samples.iter().cloned().fold(f64::MIN, f64::max);
                prop_assert!(r.gamma <= max);
                prop_assert!(r.t >= 0.0 && r.t <= t.duration());
            }
        }

        #[test]
        fn constant_shift_does_not_move_detection(
            height in 0.1f64..1.5, center in 20.0f64..100.0, width in 1.0f64..20.0, shift in -0.05f64..0.5,
        ) {
            let base = pulse_trace(height, center, width, 0.1);
            let moved = pulse_trace(height, center, width, 0.1 + shift);
            let cfg = energy(2e-3);
            let a = energy_detect(&base, &cfg).unwrap();
            let b = energy_detect(&moved, &cfg).unwrap();
            prop_assert_eq!(a.detected, b.detected);
            if a.detected {
                prop_assert!((a.t - b.t).abs() <= 1e-9);
                prop_assert!((b.gamma - a.gamma - shift).abs() < 1e-9);
            }
            let acfg = amp(0.05, 7, 50);
            let c = amplitude_detect(&base, &acfg).unwrap();
            let d = amplitude_detect(&moved, &acfg).unwrap();
            prop_assert_eq!(c.detected, d.detected);
            if c.detected {
                prop_assert!((c.t - d.t).abs() <= 1e-9);
            }
        }
    }
}
