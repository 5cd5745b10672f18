//! Equiripple linear-phase low-pass FIR design (Parks–McClellan) and the
//! convolution used to filter sensor traces.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_DENSITY: usize = 32;
const MAX_REMEZ_ITERATIONS: usize = 100;
const REMEZ_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    /// Hz.
    pub passband_edge: f64,
    /// Hz.
    pub stopband_edge: f64,
    /// Hz.
    pub sample_rate: f64,
    pub order: usize,
    /// Peak-to-peak passband ripple, dB. Sets the band weighting.
    pub passband_ripple: f64,
    /// Minimum stopband attenuation, dB. Sets the band weighting.
    pub stopband_attenuation: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            passband_edge: 0.04,
            stopband_edge: 0.09,
            sample_rate: 10.0,
            order: 242,
            passband_ripple: 1.0,
            stopband_attenuation: 40.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::param("sample_rate", "must be > 0"));
        }
        let nyquist = self.sample_rate / 2.0;
        if !(self.passband_edge > 0.0
            && self.passband_edge < self.stopband_edge
            && self.stopband_edge < nyquist)
        {
            return Err(Error::param(
                "band edges",
                format!(
                    "need 0 < passband ({}) < stopband ({}) < Nyquist ({nyquist})",
                    self.passband_edge, self.stopband_edge
                ),
            ));
        }
        if !self.order.is_multiple_of(2) {
            return Err(Error::param(
                "order",
                format!("must be even for a symmetric filter, got {}", self.order),
            ));
        }
        if !(self.passband_ripple > 0.0) || !(self.stopband_attenuation > 0.0) {
            return Err(Error::param(
                "ripple",
                "passband ripple and stopband attenuation must be > 0 dB",
            ));
        }
        Ok(())
    }

    /// Linear passband deviation corresponding to the peak-to-peak dB ripple.
    pub fn passband_deviation(&self) -> f64 {
        let g = 10f64.powf(self.passband_ripple / 20.0);
        (g - 1.0) / (g + 1.0)
    }

    pub fn stopband_deviation(&self) -> f64 {
        10f64.powf(-self.stopband_attenuation / 20.0)
    }

    fn normalized_edges(&self) -> (f64, f64) {
        (
            self.passband_edge / self.sample_rate,
            self.stopband_edge / self.sample_rate,
        )
    }
}

/// Herrmann–Rabiner–Chan estimate of the filter order needed to meet the
/// spec's ripple targets, rounded up to the next even number.
pub fn estimate_order(spec: &FilterSpec) -> Result<usize> {
    spec.validate()?;
    let (fp, fs) = spec.normalized_edges();
    let (mut dp, mut ds) = (spec.passband_deviation(), spec.stopband_deviation());
    // The fitted surface assumes the passband deviation is the larger one.
    if dp < ds {
        std::mem::swap(&mut dp, &mut ds);
    }
    let (lp, ls) = (dp.log10(), ds.log10());
    let d_inf = (5.309e-3 * lp * lp + 7.114e-2 * lp - 4.761e-1) * ls
        + (-2.66e-3 * lp * lp - 5.941e-1 * lp - 4.278e-1);
    let f = 11.01217 + 0.51244 * (lp - ls);
    let df = fs - fp;
    let length = d_inf / df - f * df + 1.0;
    let order = (length - 1.0).ceil().max(2.0) as usize;
    Ok(order + order % 2)
}

/// Diagnostics from the exchange iterations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemezReport {
    /// Weighted equiripple error level.
    pub delta: f64,
    pub iterations: usize,
    /// Final extremal set, Hz.
    pub extremal_frequencies: Vec<f64>,
    /// Weighted error at each extremal frequency.
    pub extremal_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    /// Peak `|A(f) − 1|` over the passband.
    pub passband_ripple: f64,
    /// Peak `|A(f)|` over the stopband.
    pub stopband_ripple: f64,
    pub sample_rate: f64,
    pub remez: Option<RemezReport>,
}

impl FirFilter {
    pub fn identity() -> Self {
        Self {
            taps: vec![1.0],
            passband_ripple: 0.0,
            stopband_ripple: 1.0,
            sample_rate: 1.0,
            remez: None,
        }
    }

    pub fn order(&self) -> usize {
        self.taps.len().saturating_sub(1)
    }

    /// Complex response magnitude at `freq` Hz.
    pub fn magnitude(&self, freq: f64) -> f64 {
        let w = 2.0 * PI * freq / self.sample_rate;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, h)| {
                let phase = w * n as f64;
                (re + h * phase.cos(), im - h * phase.sin())
            });
        re.hypot(im)
    }

    /// Zero-phase amplitude at `freq` Hz of a symmetric odd-length filter.
    pub fn amplitude(&self, freq: f64) -> f64 {
        amplitude(&self.taps, freq / self.sample_rate)
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.taps.len();
        (0..n / 2).all(|k| self.taps[k] == self.taps[n - 1 - k])
    }
}

fn amplitude(taps: &[f64], f: f64) -> f64 {
    let m = taps.len() / 2;
    let w = 2.0 * PI * f;
    taps[m]
        + 2.0
            * (1..=m)
                .map(|k| taps[m - k] * (w * k as f64).cos())
                .sum::<f64>()
}

/// Barycentric Lagrange weights for nodes `x`, scaled so the largest has
/// unit magnitude. Products are taken in log space so long node sets do not
/// underflow.
fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    let logs: Vec<(f64, f64)> = (0..x.len())
        .map(|k| {
            let mut log = 0.0;
            let mut sign = 1.0;
            for j in 0..x.len() {
                if j != k {
                    let d = x[k] - x[j];
                    log -= d.abs().ln();
                    if d < 0.0 {
                        sign = -sign;
                    }
                }
            }
            (sign, log)
        })
        .collect();
    let top = logs.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    logs.into_iter().map(|(s, l)| s * (l - top).exp()).collect()
}

fn barycentric_eval(x: f64, nodes: &[f64], weights: &[f64], values: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xk, &wk), &ck) in nodes.iter().zip(weights).zip(values) {
        let d = x - xk;
        if d == 0.0 {
            return ck;
        }
        let t = wk / d;
        num += t * ck;
        den += t;
    }
    num / den
}

struct Grid {
    f: Vec<f64>,
    x: Vec<f64>,
    desired: Vec<f64>,
    weight: Vec<f64>,
    /// Index ranges of the two bands.
    bands: [std::ops::Range<usize>; 2],
}

fn build_grid(fp: f64, fs: f64, m: usize, stop_weight: f64) -> Grid {
    let step = 0.5 / (GRID_DENSITY * (m + 1)) as f64;
    let mut f = Vec::new();
    let mut desired = Vec::new();
    let mut weight = Vec::new();
    let mut push_band = |lo: f64, hi: f64, d: f64, w: f64| {
        let n = (((hi - lo) / step).ceil() as usize).max(1);
        let start = f.len();
        for i in 0..=n {
            f.push(lo + (hi - lo) * i as f64 / n as f64);
            desired.push(d);
            weight.push(w);
        }
        start..f.len()
    };
    let pass = push_band(0.0, fp, 1.0, 1.0);
    let stop = push_band(fs, 0.5, 0.0, stop_weight);
    let x = f.iter().map(|v| (2.0 * PI * v).cos()).collect();
    Grid {
        f,
        x,
        desired,
        weight,
        bands: [pass, stop],
    }
}

/// Indices of alternating local extrema of `err`: maxima where the error is
/// positive and minima where it is negative.
fn find_extrema(err: &[f64], bands: &[std::ops::Range<usize>; 2]) -> Vec<usize> {
    let mut candidates = Vec::new();
    for band in bands {
        for i in band.clone() {
            let s = err[i].signum();
            let e = s * err[i];
            let left = i == band.start || e >= s * err[i - 1];
            let right = i + 1 == band.end || e > s * err[i + 1];
            if left && right && e > 0.0 {
                candidates.push(i);
            }
        }
    }
    // Within a run of equal sign keep only the largest.
    let mut alternating: Vec<usize> = Vec::with_capacity(candidates.len());
    for i in candidates {
        match alternating.last_mut() {
            Some(last) if err[*last].signum() == err[i].signum() => {
                if err[i].abs() > err[*last].abs() {
                    *last = i;
                }
            }
            _ => alternating.push(i),
        }
    }
    alternating
}

/// Parks–McClellan design of a symmetric low-pass filter.
pub fn design_fir(spec: &FilterSpec) -> Result<FirFilter> {
    if spec.order == 0 {
        return Ok(FirFilter {
            sample_rate: spec.sample_rate,
            ..FirFilter::identity()
        });
    }
    spec.validate()?;
    let (fp, fs) = spec.normalized_edges();
    let m = spec.order / 2;
    let r = m + 2;
    let stop_weight = spec.passband_deviation() / spec.stopband_deviation();
    let grid = build_grid(fp, fs, m, stop_weight);
    let ng = grid.f.len();
    if ng < r {
        return Err(Error::FilterDesign(format!(
            "grid of {ng} points cannot hold {r} extremals"
        )));
    }

    let mut ext: Vec<usize> = (0..r).map(|k| k * (ng - 1) / (r - 1)).collect();
    let mut err = vec![0.0; ng];
    let mut delta = 0.0;
    let mut iterations = 0;
    let mut interp = (Vec::new(), Vec::new(), Vec::new());
    let mut converged = false;

    while iterations < MAX_REMEZ_ITERATIONS {
        iterations += 1;
        let xe: Vec<f64> = ext.iter().map(|&i| grid.x[i]).collect();
        let gamma = barycentric_weights(&xe);
        let (mut num, mut den) = (0.0, 0.0);
        for (k, &i) in ext.iter().enumerate() {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            num += gamma[k] * grid.desired[i];
            den += gamma[k] * s / grid.weight[i];
        }
        delta = num / den;
        if !delta.is_finite() {
            return Err(Error::FilterDesign(
                "exchange produced a non-finite ripple".into(),
            ));
        }

        let nodes = xe[..=m].to_vec();
        let values: Vec<f64> = ext[..=m]
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                grid.desired[i] - s * delta / grid.weight[i]
            })
            .collect();
        let weights = barycentric_weights(&nodes);
        for (i, e) in err.iter_mut().enumerate().take(ng) {
            let a = barycentric_eval(grid.x[i], &nodes, &weights, &values);
            *e = grid.weight[i] * (grid.desired[i] - a);
        }
        interp = (nodes, weights, values);

        let mut next = find_extrema(&err, &grid.bands);
        while next.len() > r {
            let first = err[next[0]].abs();
            let last = err[*next.last().unwrap()].abs();
            if first < last {
                next.remove(0);
            } else {
                next.pop();
            }
        }
        if next.len() < r {
            return Err(Error::FilterDesign(format!(
                "only {} alternating extremals found, {r} required (iteration {iterations})",
                next.len()
            )));
        }
        let peak = next.iter().map(|&i| err[i].abs()).fold(0.0, f64::max);
        let settled = next == ext;
        ext = next;
        if settled || peak - delta.abs() <= REMEZ_RTOL * delta.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FilterDesign(format!(
            "Remez exchange did not converge in {MAX_REMEZ_ITERATIONS} iterations (ripple {delta:e})"
        )));
    }

    // Sample the cosine polynomial at N equispaced frequencies and invert.
    let (nodes, weights, values) = interp;
    let n = 2 * m + 1;
    let a: Vec<f64> = (0..=m)
        .map(|k| {
            barycentric_eval(
                (2.0 * PI * k as f64 / n as f64).cos(),
                &nodes,
                &weights,
                &values,
            )
        })
        .collect();
    let mut taps = vec![0.0; n];
    for j in 0..=m {
        let h = (a[0]
            + 2.0
                * (1..=m)
                    .map(|k| a[k] * (2.0 * PI * (k * j) as f64 / n as f64).cos())
                    .sum::<f64>())
            / n as f64;
        taps[m - j] = h;
        taps[m + j] = h;
    }

    let passband_ripple = band_peak(|f| (amplitude(&taps, f) - 1.0).abs(), 0.0, fp, n);
    let stopband_ripple = band_peak(|f| amplitude(&taps, f).abs(), fs, 0.5, n);
    let remez = RemezReport {
        delta: delta.abs(),
        iterations,
        extremal_frequencies: ext.iter().map(|&i| grid.f[i] * spec.sample_rate).collect(),
        extremal_errors: ext.iter().map(|&i| err[i]).collect(),
    };
    Ok(FirFilter {
        taps,
        passband_ripple,
        stopband_ripple,
        sample_rate: spec.sample_rate,
        remez: Some(remez),
    })
}

/// Maximum of `g` on `[lo, hi]`: dense scan followed by golden-section
/// refinement around every local peak.
fn band_peak(g: impl Fn(f64) -> f64, lo: f64, hi: f64, taps: usize) -> f64 {
    let n = ((hi - lo) * (64 * taps) as f64).ceil().max(16.0) as usize;
    let at = |i: usize| lo + (hi - lo) * i as f64 / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| g(at(i))).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    for i in 1..n {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] {
            best = best.max(golden_max(&g, at(i - 1), at(i + 1)));
        }
    }
    best
}

fn golden_max(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    gc.max(gd).max(g(a)).max(g(b))
}

/// Filters `x` with `f`, shifting the output back by the group delay so it
/// lines up with the input. Samples outside `x` are taken as zero.
pub fn apply_fir(f: &FirFilter, x: &[f64]) -> Vec<f64> {
    let h = &f.taps;
    let delay = f.order() / 2;
    let len = x.len() as isize;
    (0..len)
        .map(|n| {
            h.iter()
                .enumerate()
                .map(|(k, &hk)| {
                    let idx = n + delay as isize - k as isize;
                    if (0..len).contains(&idx) {
                        hk * x[idx as usize]
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect()
}
