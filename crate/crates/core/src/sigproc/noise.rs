use crate::detection::estimate_offset;
use crate::error::{Error, Result};
use crate::sensor::Trace;

use super::filter::{apply_fir, FirFilter};

/// Length of the window used for signal-distribution fitting, s.
pub const FIRST_WINDOW_SECONDS: f64 = 90.0;

/// The stages of separating a trace into a smooth signal and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseExtraction {
    pub offset: f64,
    /// Trace minus offset.
    pub non_offset: Vec<f64>,
    /// Low-pass filtered `non_offset`, taken as the sensed signal.
    pub filtered: Vec<f64>,
    /// `non_offset − filtered`.
    pub noise: Vec<f64>,
}

pub fn extract_noise(trace: &Trace, p: usize, filter: &FirFilter) -> Result<NoiseExtraction> {
    if trace.len() <= filter.order() {
        return Err(Error::param(
            "trace",
            format!(
                "{} samples for a filter of order {}",
                trace.len(),
                filter.order()
            ),
        ));
    }
    let offset = estimate_offset(trace, p)?;
    let non_offset: Vec<f64> = trace.samples.iter().map(|v| v - offset).collect();
    let filtered = apply_fir(filter, &non_offset);
    let noise = non_offset
        .iter()
        .zip(&filtered)
        .map(|(g, x)| g - x)
        .collect();
    Ok(NoiseExtraction {
        offset,
        non_offset,
        filtered,
        noise,
    })
}

/// The first 90 s of a trace.
pub fn first_half_window(trace: &Trace) -> Result<Trace> {
    let keep = (FIRST_WINDOW_SECONDS * trace.sample_rate).round() as usize;
    if trace.len() < keep {
        return Err(Error::param(
            "trace",
            format!(
                "{:.3} s is shorter than the {FIRST_WINDOW_SECONDS} s window",
                trace.duration()
            ),
        ));
    }
    Ok(Trace::new(
        trace.node,
        trace.samples[..keep].to_vec(),
        trace.sample_rate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plume::{PlumeParams, Point2, Point3, Sigma, Wind};
    use crate::sensor::{synthesize_trace_components, NodeId, NoiseModel, SensitivityParams};
    use crate::sigproc::{design_fir, FilterSpec};

    fn node() -> NodeId {
        NodeId::new(1, 1)
    }

    #[test]
    fn window_lengths() {
        let t = |secs: usize| Trace::new(node(), vec![0.0; secs * 10], 10.0);
        assert_eq!(first_half_window(&t(180)).unwrap().len(), 900);
        assert_eq!(first_half_window(&t(90)).unwrap(), t(90));
        assert!(first_half_window(&t(60)).is_err());
    }

    #[test]
    fn constant_trace_has_no_noise() {
        let f = design_fir(&FilterSpec::default()).unwrap();
        let tr = Trace::new(node(), vec![0.37; 1800], 10.0);
        let out = extract_noise(&tr, 50, &f).unwrap();
        assert!(out.noise.iter().all(|w| w.abs() < 1e-15));
        assert!(extract_noise(&Trace::new(node(), vec![0.1; 200], 10.0), 50, &f).is_err());
    }

    #[test]
    fn pipeline_reconstructs_trace() {
        let f = design_fir(&FilterSpec::default()).unwrap();
        let samples: Vec<f64> = (0..1800)
            .map(|i| 0.1 + 0.3 * ((i as f64) * 0.37).sin().powi(2))
            .collect();
        let tr = Trace::new(node(), samples, 10.0);
        let out = extract_noise(&tr, 50, &f).unwrap();
        for (i, &z) in tr.samples.iter().enumerate() {
            assert!((out.filtered[i] + out.noise[i] + out.offset - z).abs() < 1e-14);
            assert!((out.filtered[i] + out.noise[i] - out.non_offset[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn injected_noise_variance_is_recovered() {
        let f = design_fir(&FilterSpec::default()).unwrap();
        let plume = PlumeParams {
            mass: 1e-8,
            source: Point3::new(0.3, 0.3, 0.0),
            wind: Wind::new(0.003, 0.0),
            sigma: Sigma::TABLE,
        };
        let sp = SensitivityParams::default();
        let noise = NoiseModel::default();
        // The puff passes well clear of this node, so the trace is offset
        // plus noise and any signal left in `w` would show as excess variance.
        let parts = synthesize_trace_components(
            node(),
            Point2::new(0.45, 0.45),
            &plume,
            &noise,
            &sp,
            10.0,
            180.0,
            5,
        )
        .unwrap();
        let trace = parts.compose(sp.v_in);
        let out = extract_noise(&trace, 50, &f).unwrap();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        // Skip the zero-padded edges of the filter.
        let inner = 250..trace.len() - 250;
        // Noise as it reached the trace, after clamping to the supply range.
        let realised: Vec<f64> = trace
            .samples
            .iter()
            .zip(&parts.signal)
            .map(|(z, x)| z - parts.offset - x)
            .collect();
        let injected = var(&realised[inner.clone()]);
        let extracted = var(&out.noise[inner]);
        assert!(
            (extracted - injected).abs() / injected < 0.1,
            "{extracted} vs {injected}"
        );
    }
}
