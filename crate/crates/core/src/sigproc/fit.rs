//! Histogram construction and least-squares fitting of candidate
//! probability densities to it.
//!
//! Each family is fitted by Levenberg–Marquardt to the density-normalised
//! histogram. The model value for a bin is the probability mass the family
//! places in that bin divided by the bin width, so narrow spikes near a
//! boundary are represented faithfully. Strictly positive parameters are
//! optimised on a log scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal, Normal, StudentsT, Weibull};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::numerics::{lm_fit, LmProblem};

pub const MIN_SAMPLES: usize = 100;
pub const MIN_BINS: usize = 10;
/// Fraction of samples left out of each tail when choosing the histogram
/// range. Heavy-tailed noise would otherwise stretch the range so far that
/// almost every bin is empty.
pub const DEFAULT_TRIM: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    StudentT,
    LogNormal,
    Weibull,
    InverseGaussian,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::StudentT,
        Family::LogNormal,
        Family::Weibull,
        Family::InverseGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::StudentT => "student_t",
            Family::LogNormal => "log_normal",
            Family::Weibull => "weibull",
            Family::InverseGaussian => "inverse_gaussian",
        }
    }

    pub fn param_names(self) -> [&'static str; 2] {
        match self {
            Family::StudentT => ["nu", "scale"],
            Family::LogNormal => ["mu_ln", "sigma_ln"],
            Family::Weibull => ["eta", "theta"],
            Family::InverseGaussian => ["mu_ig", "lambda_ig"],
        }
    }

    /// Cumulative distribution function at `x`.
    pub fn cdf(self, params: [f64; 2], x: f64) -> Result<f64> {
        let [a, b] = params;
        let bad = |e: &dyn fmt::Display| {
            Error::param("distribution parameters", format!("{}: {e}", self.name()))
        };
        Ok(match self {
            Family::StudentT => StudentsT::new(0.0, b, a).map_err(|e| bad(&e))?.cdf(x),
            Family::LogNormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    LogNormal::new(a, b).map_err(|e| bad(&e))?.cdf(x)
                }
            }
            Family::Weibull => {
                if x <= 0.0 {
                    0.0
                } else {
                    Weibull::new(a, b).map_err(|e| bad(&e))?.cdf(x)
                }
            }
            Family::InverseGaussian => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(bad(&"mean and shape must be > 0"));
                }
                inverse_gaussian_cdf(a, b, x)
            }
        })
    }

    fn params_to_internal(self, p: [f64; 2]) -> Vec<f64> {
        match self {
            Family::LogNormal => vec![p[0], p[1].ln()],
            _ => vec![p[0].ln(), p[1].ln()],
        }
    }

    fn params_from_internal(self, q: &[f64]) -> [f64; 2] {
        let e = |v: f64| v.clamp(-700.0, 700.0).exp();
        match self {
            Family::LogNormal => [q[0], e(q[1])],
            _ => [e(q[0]), e(q[1])],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::param("family", format!("unknown distribution `{s}`")))
    }
}

/// `ln erfc(z)` for `z ≥ 0`, switching to the asymptotic series where
/// `erfc` itself underflows.
fn ln_erfc(z: f64) -> f64 {
    if z < 20.0 {
        erfc(z).ln()
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2) - 15.0 / (8.0 * z2 * z2 * z2);
        -z2 - (z * std::f64::consts::PI.sqrt()).ln() + series.ln()
    }
}

fn inverse_gaussian_cdf(mu: f64, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let std_normal = Normal::standard();
    let r = (lambda / x).sqrt();
    let first = std_normal.cdf(r * (x / mu - 1.0));
    // exp(2λ/μ)·Φ(−b) can overflow before the product is formed.
    let b = r * (x / mu + 1.0);
    let second =
        (2.0 * lambda / mu + ln_erfc(b / std::f64::consts::SQRT_2) - std::f64::consts::LN_2).exp();
    (first + second).min(1.0)
}

/// Density-normalised histogram over a fixed range. Samples outside the
/// range are counted in `total` but fall in no bin, so bin densities stay
/// on the scale of the full sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl Histogram {
    pub fn new(samples: &[f64], bins: usize, range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = range;
        if bins == 0 {
            return Err(Error::param("bins", "must be >= 1"));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::param(
                "histogram range",
                format!("empty support [{lo}, {hi}]"),
            ));
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &x in samples {
            if x >= lo && x <= hi {
                let k = (((x - lo) / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
        }
        Ok(Self {
            edges,
            counts,
            total: samples.len(),
        })
    }

    /// Histogram over the central quantile range `[trim, 1 − trim]`.
    pub fn trimmed(samples: &[f64], bins: usize, trim: f64) -> Result<Self> {
        Self::new(samples, bins, trimmed_range(samples, trim)?)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        let scale = 1.0 / (self.total as f64 * self.width());
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("samples", "must all be finite"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn trimmed_range(samples: &[f64], trim: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::param("samples", "empty"));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::param("trim", "must be in [0, 0.5)"));
    }
    let s = sorted_finite(samples)?;
    Ok((quantile(&s, trim), quantile(&s, 1.0 - trim)))
}

/// Freedman–Diaconis bin count for `samples` over `range`.
pub fn freedman_diaconis_bins(samples: &[f64], range: (f64, f64)) -> Result<usize> {
    if samples.len() < 2 {
        return Err(Error::param("samples", "need at least two"));
    }
    let s = sorted_finite(samples)?;
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    if !(iqr > 0.0) {
        return Err(Error::param("samples", "zero interquartile range"));
    }
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    Ok((((range.1 - range.0) / width).ceil() as usize).max(1))
}

/// Freedman–Diaconis bin count over the default trimmed range, never below
/// the fitting minimum.
pub fn default_bins(samples: &[f64]) -> Result<usize> {
    let range = trimmed_range(samples, DEFAULT_TRIM)?;
    Ok(freedman_diaconis_bins(samples, range)?.max(MIN_BINS))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionFit {
    pub family: Family,
    pub params: [f64; 2],
    /// Mean squared difference between fitted and histogram densities.
    pub mse: f64,
    pub bins: usize,
    pub iterations: usize,
}

/// Model bin densities for `family` on `hist`.
pub fn bin_densities(family: Family, params: [f64; 2], hist: &Histogram) -> Result<Vec<f64>> {
    let cdf: Vec<f64> = hist
        .edges
        .iter()
        .map(|&x| family.cdf(params, x))
        .collect::<Result<_>>()?;
    let w = hist.width();
    Ok(cdf.windows(2).map(|c| (c[1] - c[0]) / w).collect())
}

fn initial_guess(family: Family, sorted: &[f64]) -> Result<[f64; 2]> {
    let positive: Vec<f64> = sorted.iter().copied().filter(|&x| x > 0.0).collect();
    let need_positive = || {
        if positive.len() < MIN_SAMPLES {
            Err(Error::param(
                "samples",
                format!(
                    "{} needs at least {MIN_SAMPLES} positive samples",
                    family.name()
                ),
            ))
        } else {
            Ok(())
        }
    };
    Ok(match family {
        Family::StudentT => {
            let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
            // Quartile of a unit t variate with two degrees of freedom.
            [
                2.0,
                (iqr / (2.0 * 0.816_496_580_927_726)).max(f64::MIN_POSITIVE),
            ]
        }
        Family::LogNormal => {
            need_positive()?;
            let logs: Vec<f64> = positive.iter().map(|x| x.ln()).collect();
            let iqr = quantile(&logs, 0.75) - quantile(&logs, 0.25);
            [
                quantile(&logs, 0.5),
                (iqr / 1.348_979_500_392_163).max(1e-6),
            ]
        }
        Family::Weibull => {
            need_positive()?;
            let (q1, q2, q3) = (
                quantile(&positive, 0.25),
                quantile(&positive, 0.5),
                quantile(&positive, 0.75),
            );
            let eta = ((-(0.25f64).ln()).ln() - (-(0.75f64).ln()).ln()) / (q3.ln() - q1.ln());
            let eta = if eta.is_finite() && eta > 0.0 {
                eta
            } else {
                1.0
            };
            [eta, q2 / std::f64::consts::LN_2.powf(1.0 / eta)]
        }
        Family::InverseGaussian => {
            need_positive()?;
            let n = positive.len() as f64;
            let mean = positive.iter().sum::<f64>() / n;
            let var = positive.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            [mean, if var > 0.0 { mean.powi(3) / var } else { mean }]
        }
    })
}

/// Fits `family` to a `bins`-bin histogram of `samples` over the default
/// trimmed range.
pub fn fit_distribution(samples: &[f64], family: Family, bins: usize) -> Result<DistributionFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::param(
            "samples",
            format!("need at least {MIN_SAMPLES}, got {}", samples.len()),
        ));
    }
    if bins < MIN_BINS {
        return Err(Error::param(
            "bins",
            format!("need at least {MIN_BINS}, got {bins}"),
        ));
    }
    let sorted = sorted_finite(samples)?;
    let range = (
        quantile(&sorted, DEFAULT_TRIM),
        quantile(&sorted, 1.0 - DEFAULT_TRIM),
    );
    let hist = Histogram::new(samples, bins, range)?;
    fit_histogram(&hist, family, initial_guess(family, &sorted)?)
}

/// Fits `family` to an existing histogram from the starting point `init`.
pub fn fit_histogram(hist: &Histogram, family: Family, init: [f64; 2]) -> Result<DistributionFit> {
    let observed = hist.densities();
    let residuals = |q: &[f64]| -> Vec<f64> {
        match bin_densities(family, family.params_from_internal(q), hist) {
            Ok(model) => model.iter().zip(&observed).map(|(m, o)| m - o).collect(),
            Err(_) => vec![f64::NAN; observed.len()],
        }
    };
    let problem = LmProblem::new(residuals, family.params_to_internal(init))
        .max_iterations(500)
        .tolerance(1e-12);
    let fit = lm_fit(&problem)?;
    let params = family.params_from_internal(&fit.params);
    let model = bin_densities(family, params, hist)?;
    let mse = model
        .iter()
        .zip(&observed)
        .map(|(m, o)| (m - o).powi(2))
        .sum::<f64>()
        / observed.len() as f64;
    Ok(DistributionFit {
        family,
        params,
        mse,
        bins: hist.bins(),
        iterations: fit.iterations,
    })
}
