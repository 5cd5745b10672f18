//! Seeded Monte Carlo measurements through the full pipeline.
//!
//! Measurement `m` derives its own seed from the experiment seed, so any
//! single measurement can be reproduced alone and results do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::io::{num, write_csv, DETECTION_HEADER};
use crate::detection::{detect_all, DetectionConfig, DetectionResult, Scheme};
use crate::error::{Error, Result};
use crate::estimation::{
    cluster_error, sncla, ClusterError, ClusterId, LocationEstimate, SnclaOutput,
};
use crate::numerics::{derive_seed, rng_for};
use crate::plume::{Point2, Wind};
use crate::sensor::{synthesize_traces, NodeId, SensorGrid, Trace};

const WIND_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub wind: Wind,
    pub mass: f64,
    pub source: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// 1-based.
    pub index: usize,
    pub seed: u64,
    pub truth: Truth,
    pub traces: Vec<Trace>,
}

pub fn measurement_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

fn measurement_wind(cfg: &ExperimentConfig, seed: u64) -> Wind {
    let w = cfg.plume.wind;
    let s = cfg.plume.wind_spread;
    if s == 0.0 {
        return w;
    }
    let mut rng = rng_for(seed, WIND_STREAM);
    Wind::new(
        w.ux + rng.random_range(-s..=s),
        w.uy + rng.random_range(-s..=s),
    )
}

pub fn simulate_measurement(
    cfg: &ExperimentConfig,
    grid: &SensorGrid,
    index: usize,
) -> Result<Measurement> {
    let seed = measurement_seed(cfg.seed, index);
    let wind = measurement_wind(cfg, seed);
    let plume = cfg.plume_for(wind)?;
    let traces = synthesize_traces(
        grid,
        &plume,
        &cfg.noise,
        &cfg.sensor,
        cfg.sample_rate,
        cfg.duration,
        seed,
    )?;
    Ok(Measurement {
        index,
        seed,
        truth: Truth {
            wind,
            mass: plume.mass,
            source: cfg.plume.source,
        },
        traces,
    })
}

pub fn simulate_all(cfg: &ExperimentConfig, grid: &SensorGrid) -> Result<Vec<Measurement>> {
    (1..=cfg.measurements)
        .into_par_iter()
        .map(|m| simulate_measurement(cfg, grid, m))
        .collect()
}

/// Detection and localisation for one measurement.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub index: usize,
    pub detections: Vec<DetectionResult>,
    /// Localisation result, or the reason it failed.
    pub estimate: std::result::Result<SnclaOutput, String>,
}

impl Outcome {
    pub fn estimates(&self) -> &[LocationEstimate] {
        self.estimate
            .as_ref()
            .map_or(&[], |o| o.estimates.as_slice())
    }
}

pub fn analyse(
    cfg: &ExperimentConfig,
    detection: &DetectionConfig,
    grid: &SensorGrid,
    index: usize,
    traces: &[Trace],
) -> Result<Outcome> {
    let detections = detect_all(traces, detection)?;
    let estimate =
        sncla(&detections, grid, &cfg.sensor, &cfg.estimation).map_err(|e| e.to_string());
    Ok(Outcome {
        index,
        detections,
        estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeDetectionTime {
    pub node: NodeId,
    /// Mean over the measurements in which the node detected, s.
    pub mean_t: f64,
    pub detections: usize,
}

pub fn mean_detection_times(
    grid: &SensorGrid,
    outcomes: &[Vec<DetectionResult>],
) -> Vec<NodeDetectionTime> {
    let mut sums: BTreeMap<NodeId, (f64, usize)> =
        grid.nodes().iter().map(|&n| (n, (0.0, 0))).collect();
    for d in outcomes.iter().flatten().filter(|d| d.detected) {
        if let Some(slot) = sums.get_mut(&d.node) {
            slot.0 += d.t;
            slot.1 += 1;
        }
    }
    grid.nodes()
        .iter()
        .map(|&node| {
            let (sum, count) = sums[&node];
            NodeDetectionTime {
                node,
                mean_t: if count > 0 {
                    sum / count as f64
                } else {
                    f64::NAN
                },
                detections: count,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub truths: Vec<Truth>,
    pub outcomes: Vec<Outcome>,
    /// Empty when no measurement produced an estimate.
    pub cluster_errors: Vec<ClusterError>,
    pub detection_times: Vec<NodeDetectionTime>,
    pub failures: usize,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let results: Vec<(Truth, Outcome)> = (1..=cfg.measurements)
        .into_par_iter()
        .map(|m| {
            let meas = simulate_measurement(cfg, &grid, m)?;
            let outcome = analyse(cfg, &cfg.detection, &grid, m, &meas.traces)?;
            Ok((meas.truth, outcome))
        })
        .collect::<Result<_>>()?;
    let (truths, outcomes): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let failures = outcomes.iter().filter(|o| o.estimate.is_err()).count();
    let per_measurement: Vec<Vec<LocationEstimate>> =
        outcomes.iter().map(|o| o.estimates().to_vec()).collect();
    let cluster_errors = cluster_error(&per_measurement, cfg.plume.source)?;
    let detections: Vec<Vec<DetectionResult>> =
        outcomes.iter().map(|o| o.detections.clone()).collect();
    let detection_times = mean_detection_times(&grid, &detections);
    Ok(RunReport {
        truths,
        outcomes,
        cluster_errors,
        detection_times,
        failures,
    })
}

pub const ESTIMATE_HEADER: [&str; 7] = [
    "measurement",
    "cluster",
    "pair",
    "x_hat_m",
    "y_hat_m",
    "root2_x_m",
    "root2_y_m",
];
pub const WIND_HEADER: [&str; 6] = ["measurement", "ux", "uy", "u", "Qe", "mT"];

pub fn estimate_rows(index: usize, estimates: &[LocationEstimate]) -> Vec<Vec<String>> {
    estimates
        .iter()
        .map(|e| {
            vec![
                index.to_string(),
                e.cluster.to_string(),
                e.pair.to_string(),
                num(e.x_hat),
                num(e.y_hat),
                num(e.root2.x),
                num(e.root2.y),
            ]
        })
        .collect()
}

pub fn wind_row(index: usize, estimate: &std::result::Result<SnclaOutput, String>) -> Vec<String> {
    match estimate {
        Ok(o) => vec![
            index.to_string(),
            num(o.wind.wind.ux),
            num(o.wind.wind.uy),
            num(o.mass.u),
            num(o.mass.q_e),
            num(o.mass.m_t),
        ],
        Err(_) => {
            let mut row = vec![index.to_string()];
            row.extend(std::iter::repeat_n("NaN".to_string(), 5));
            row
        }
    }
}

pub fn cluster_error_rows(errors: &[ClusterError]) -> Vec<Vec<String>> {
    errors
        .iter()
        .map(|c| vec![c.cluster.to_string(), num(c.error), c.pairs.to_string()])
        .collect()
}

pub fn detection_time_rows(times: &[NodeDetectionTime]) -> Vec<Vec<String>> {
    times
        .iter()
        .map(|t| vec![t.node.to_string(), num(t.mean_t), t.detections.to_string()])
        .collect()
}

/// Writes every table of a report into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    let mut det_header = vec!["measurement"];
    det_header.extend(DETECTION_HEADER);
    write_csv(
        &dir.join("detections.csv"),
        &det_header,
        report.outcomes.iter().flat_map(|o| {
            super::io::detection_rows(&o.detections).map(move |mut r| {
                r.insert(0, o.index.to_string());
                r
            })
        }),
    )?;
    write_csv(
        &dir.join("truth.csv"),
        &["measurement", "ux", "uy", "mT", "x_T", "y_T"],
        report.truths.iter().zip(&report.outcomes).map(|(t, o)| {
            vec![
                o.index.to_string(),
                num(t.wind.ux),
                num(t.wind.uy),
                num(t.mass),
                num(t.source.x),
                num(t.source.y),
            ]
        }),
    )?;
    write_csv(
        &dir.join("wind.csv"),
        &WIND_HEADER,
        report
            .outcomes
            .iter()
            .map(|o| wind_row(o.index, &o.estimate)),
    )?;
    write_csv(
        &dir.join("estimates.csv"),
        &ESTIMATE_HEADER,
        report
            .outcomes
            .iter()
            .flat_map(|o| estimate_rows(o.index, o.estimates())),
    )?;
    write_csv(
        &dir.join("cluster_error.csv"),
        &["cluster", "error_m", "pairs"],
        cluster_error_rows(&report.cluster_errors),
    )?;
    write_csv(
        &dir.join("detection_times.csv"),
        &["node", "mean_t_s", "detections"],
        detection_time_rows(&report.detection_times),
    )?;
    write_csv(
        &dir.join("failures.csv"),
        &["measurement", "error"],
        report.outcomes.iter().filter_map(|o| {
            o.estimate
                .as_ref()
                .err()
                .map(|e| vec![o.index.to_string(), e.clone()])
        }),
    )
}

/// Inclusive threshold grid `LO:HI:STEP`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite()
            && hi.is_finite()
            && step > 0.0
            && step.is_finite()
            && hi >= lo
            && lo >= 0.0)
        {
            return Err(Error::param(
                "sweep",
                format!("need 0 <= LO <= HI and STEP > 0, got {lo}:{hi}:{step}"),
            ));
        }
        Ok(Self { lo, hi, step })
    }

    /// Energy thresholds 0 to 15 mJ in 1 mJ steps, amplitude thresholds
    /// 0 to 0.15 V in 10 mV steps.
    pub fn default_for(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Energy => Self {
                lo: 0.0,
                hi: 0.015,
                step: 0.001,
            },
            Scheme::Amplitude => Self {
                lo: 0.0,
                hi: 0.15,
                step: 0.01,
            },
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + self.step * i as f64).collect()
    }
}

impl FromStr for SweepRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(Error::param(
                "sweep",
                format!("expected LO:HI:STEP, got `{s}`"),
            ));
        };
        let p = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::param("sweep", format!("`{v}` is not a number")))
        };
        Self::new(p(lo)?, p(hi)?, p(step)?)
    }
}

impl fmt::Display for SweepRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub n: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            return Self {
                n: 0,
                min: f64::NAN,
                q25: f64::NAN,
                median: f64::NAN,
                q75: f64::NAN,
                max: f64::NAN,
            };
        }
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 < v.len() {
                v[i] + frac * (v[i + 1] - v[i])
            } else {
                v[i]
            }
        };
        Self {
            n: v.len(),
            min: v[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: v[v.len() - 1],
        }
    }
}

/// Mean distance to `truth` over the pair estimates of each cluster in one
/// measurement.
pub fn measurement_errors(
    estimates: &[LocationEstimate],
    truth: Point2,
) -> BTreeMap<ClusterId, f64> {
    let mut acc: BTreeMap<ClusterId, (f64, usize)> = BTreeMap::new();
    for e in estimates {
        let slot = acc.entry(e.cluster).or_insert((0.0, 0));
        slot.0 += e.point().distance(truth);
        slot.1 += 1;
    }
    acc.into_iter()
        .map(|(c, (s, n))| (c, s / n as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub failures: usize,
    /// Over measurements, of the mean distance across all pair estimates.
    pub overall: Quartiles,
    /// Per cluster, over the measurements in which the cluster was used.
    pub clusters: [Quartiles; 4],
}

pub const SWEEP_HEADER: [&str; 12] = [
    "threshold",
    "failures",
    "n",
    "min",
    "q25",
    "median",
    "q75",
    "max",
    "c1_median",
    "c2_median",
    "c3_median",
    "c4_median",
];

pub fn run_sweep(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    range: SweepRange,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let measurements = simulate_all(cfg, &grid)?;
    range
        .values()
        .into_par_iter()
        .map(|threshold| {
            let det = DetectionConfig {
                scheme,
                ..cfg.detection
            }
            .with_threshold(threshold);
            let mut overall = Vec::new();
            let mut per_cluster: [Vec<f64>; 4] = Default::default();
            let mut failures = 0;
            for m in &measurements {
                let o = analyse(cfg, &det, &grid, m.index, &m.traces)?;
                let est = o.estimates();
                if o.estimate.is_err() {
                    failures += 1;
                    continue;
                }
                let truth = m.truth.source;
                overall.push(
                    est.iter().map(|e| e.point().distance(truth)).sum::<f64>() / est.len() as f64,
                );
                for (c, err) in measurement_errors(est, truth) {
                    per_cluster[c.number() as usize - 1].push(err);
                }
            }
            Ok(SweepRow {
                threshold,
                failures,
                overall: Quartiles::of(&overall),
                clusters: per_cluster.map(|v| Quartiles::of(&v)),
            })
        })
        .collect()
}

pub fn sweep_rows(rows: &[SweepRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let q = &r.overall;
            let mut row = vec![
                num(r.threshold),
                r.failures.to_string(),
                q.n.to_string(),
                num(q.min),
                num(q.q25),
                num(q.median),
                num(q.q75),
                num(q.max),
            ];
            row.extend(r.clusters.iter().map(|c| num(c.median)));
            row
        })
        .collect()
}
