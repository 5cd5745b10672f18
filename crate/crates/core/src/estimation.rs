//! Clustered source localisation from per-node detections.
//!
//! The pipeline runs in four steps:
//!
//! 1. Wind components come from arrival-time differences between adjacent
//!    nodes on the four edges of the grid.
//! 2. The released mass follows from the wind speed through an evaporation
//!    law.
//! 3. Every detection voltage is converted back to a concentration and then
//!    to a log-residual `n`.
//! 4. For each adjacent node pair in the two downwind clusters, the two
//!    Gaussian level-set equations are intersected to give a source estimate.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionResult;
use crate::error::{Error, Result};
use crate::numerics::{solve_ellipse_pair, AxisQuadric, ComplexRootPair};
use crate::plume::{Point2, Sigma, Wind};
use crate::sensor::{concentration_from_voltage, NodeId, SensitivityParams, SensorGrid};

/// Evaporation coefficient of ethanol in `Q_e = h1·u^0.54`.
pub const H1: f64 = 4e-3;
/// Wind-speed exponent of the evaporation law.
pub const EVAPORATION_EXPONENT: f64 = 0.54;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClusterId {
    /// Columns 1 and 2; sees wind towards −x.
    One = 1,
    /// The top two rows; sees wind towards +y.
    Two = 2,
    /// The last two columns; sees wind towards +x.
    Three = 3,
    /// Rows 1 and 2; sees wind towards −y.
    Four = 4,
}

impl ClusterId {
    pub const ALL: [ClusterId; 4] = [
        ClusterId::One,
        ClusterId::Two,
        ClusterId::Three,
        ClusterId::Four,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.number() == n)
    }

    pub fn axis(self) -> Axis {
        match self {
            ClusterId::One | ClusterId::Three => Axis::X,
            ClusterId::Two | ClusterId::Four => Axis::Y,
        }
    }

    /// Adjacent node pairs of this cluster, numbered from 1 along the edge.
    ///
    /// `inner` is the node nearer the grid centre; wind blowing outwards
    /// across this edge reaches it first.
    pub fn pairs(self, grid: &SensorGrid) -> Vec<NodePair> {
        let (r, c) = (grid.rows(), grid.cols());
        let candidates: Vec<(usize, NodeId, NodeId)> = match self {
            ClusterId::One => (1..=r)
                .map(|i| (i, NodeId::new(i, 2), NodeId::new(i, 1)))
                .collect(),
            ClusterId::Three => (1..=r)
                .map(|i| (i, NodeId::new(i, c - 1), NodeId::new(i, c)))
                .collect(),
            ClusterId::Two => (1..=c)
                .map(|j| (j, NodeId::new(r - 1, j), NodeId::new(r, j)))
                .collect(),
            ClusterId::Four => (1..=c)
                .map(|j| (j, NodeId::new(2, j), NodeId::new(1, j)))
                .collect(),
        };
        if r < 2 && self.axis() == Axis::Y || c < 2 && self.axis() == Axis::X {
            return Vec::new();
        }
        candidates
            .into_iter()
            .filter(|(_, a, b)| grid.contains(*a) && grid.contains(*b))
            .map(|(index, inner, outer)| NodePair {
                cluster: self,
                index,
                inner,
                outer,
            })
            .collect()
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodePair {
    pub cluster: ClusterId,
    pub index: usize,
    pub inner: NodeId,
    pub outer: NodeId,
}

/// Arrival-time speed estimate from one node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairVelocity {
    pub u: f64,
    pub valid: bool,
}

/// Speed along `axis` implied by node 1 detecting at `t1` and node 2 at `t2`.
/// Pairs where node 2 does not fire strictly after node 1 are invalid.
pub fn pairwise_wind(pos1: Point2, pos2: Point2, t1: f64, t2: f64, axis: Axis) -> PairVelocity {
    let dt = t2 - t1;
    let distance = match axis {
        Axis::X => (pos2.x - pos1.x).abs(),
        Axis::Y => (pos2.y - pos1.y).abs(),
    };
    if dt.is_finite() && dt > 0.0 {
        PairVelocity {
            u: distance / dt,
            valid: true,
        }
    } else {
        PairVelocity {
            u: f64::NAN,
            valid: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterPairVelocity {
    pub pair: NodePair,
    pub velocity: PairVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DirectionalMeans {
    pub x_minus: f64,
    pub x_plus: f64,
    pub y_plus: f64,
    pub y_minus: f64,
}

impl DirectionalMeans {
    pub fn of(&self, cluster: ClusterId) -> f64 {
        match cluster {
            ClusterId::One => self.x_minus,
            ClusterId::Two => self.y_plus,
            ClusterId::Three => self.x_plus,
            ClusterId::Four => self.y_minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindEstimate {
    pub means: DirectionalMeans,
    /// `max(ū_x−, ū_x+)`.
    pub speed_x: f64,
    /// `max(ū_y−, ū_y+)`.
    pub speed_y: f64,
    /// Signed velocity: negative components point along −x or −y.
    pub wind: Wind,
    pub pairs: Vec<ClusterPairVelocity>,
}

impl WindEstimate {
    pub fn valid_pairs(&self, cluster: ClusterId) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.pair.cluster == cluster && p.velocity.valid)
            .count()
    }

    fn pair_velocity(&self, pair: &NodePair) -> Option<PairVelocity> {
        self.pairs
            .iter()
            .find(|p| p.pair.cluster == pair.cluster && p.pair.index == pair.index)
            .map(|p| p.velocity)
    }
}

fn index_detections(detections: &[DetectionResult]) -> HashMap<NodeId, &DetectionResult> {
    detections.iter().map(|d| (d.node, d)).collect()
}

fn detection_time(map: &HashMap<NodeId, &DetectionResult>, node: NodeId) -> f64 {
    map.get(&node)
        .filter(|d| d.detected)
        .map_or(f64::NAN, |d| d.t)
}

/// Directional wind means over the valid pairs of each cluster, and the
/// dominant component on each axis.
pub fn cluster_wind(detections: &[DetectionResult], grid: &SensorGrid) -> Result<WindEstimate> {
    let map = index_detections(detections);
    let mut pairs = Vec::new();
    let mut means = [0.0; 4];
    let mut any_valid = false;
    for (slot, cluster) in ClusterId::ALL.into_iter().enumerate() {
        let mut valid = Vec::new();
        for pair in cluster.pairs(grid) {
            let velocity = pairwise_wind(
                grid.position(pair.inner),
                grid.position(pair.outer),
                detection_time(&map, pair.inner),
                detection_time(&map, pair.outer),
                cluster.axis(),
            );
            if velocity.valid {
                valid.push(velocity.u);
            }
            pairs.push(ClusterPairVelocity { pair, velocity });
        }
        if !valid.is_empty() {
            any_valid = true;
            means[slot] = valid.iter().sum::<f64>() / valid.len() as f64;
        }
    }
    if !any_valid {
        return Err(Error::WindEstimation);
    }
    let means = DirectionalMeans {
        x_minus: means[0],
        y_plus: means[1],
        x_plus: means[2],
        y_minus: means[3],
    };
    let speed_x = means.x_minus.max(means.x_plus);
    let speed_y = means.y_minus.max(means.y_plus);
    let ux = if speed_x == means.x_minus {
        -speed_x
    } else {
        speed_x
    };
    let uy = if speed_y == means.y_plus {
        speed_y
    } else {
        -speed_y
    };
    Ok(WindEstimate {
        means,
        speed_x,
        speed_y,
        wind: Wind::new(ux, uy),
        pairs,
    })
}

/// The two clusters used for localisation, chosen by which direction won on
/// each axis. The branches are tested in order with exact comparisons.
pub fn select_clusters(w: &WindEstimate) -> [ClusterId; 2] {
    let m = &w.means;
    if w.speed_x == m.x_minus && w.speed_y == m.y_plus {
        [ClusterId::One, ClusterId::Two]
    } else if w.speed_x == m.x_minus && m.y_minus == m.y_plus {
        [ClusterId::One, ClusterId::Four]
    } else if w.speed_x == m.x_plus && w.speed_y == m.y_plus {
        [ClusterId::Two, ClusterId::Three]
    } else {
        [ClusterId::Three, ClusterId::Four]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassEstimate {
    /// Wind speed, m/s.
    pub u: f64,
    /// Evaporation flux, kg/(m²·s).
    pub q_e: f64,
    /// Mass flow, kg/s.
    pub q: f64,
    /// Released mass, kg.
    pub m_t: f64,
    pub area: f64,
    pub emission_time: f64,
    pub h1: f64,
    /// Set when the wind speed is zero and no mass is released.
    pub degenerate: bool,
}

pub fn transmitted_mass(ux: f64, uy: f64, area: f64, emission_time: f64) -> Result<MassEstimate> {
    if !(area > 0.0) || !area.is_finite() {
        return Err(Error::param("area", "must be > 0"));
    }
    if !(emission_time > 0.0) || !emission_time.is_finite() {
        return Err(Error::param("emission_time", "must be > 0"));
    }
    if !ux.is_finite() || !uy.is_finite() {
        return Err(Error::param("wind", "components must be finite"));
    }
    let u = ux.hypot(uy);
    let q_e = H1 * u.powf(EVAPORATION_EXPONENT);
    let q = q_e * area;
    Ok(MassEstimate {
        u,
        q_e,
        q,
        m_t: q * emission_time,
        area,
        emission_time,
        h1: H1,
        degenerate: u == 0.0,
    })
}

/// Log of the measured concentration relative to the puff peak for mass `m_t`.
pub fn residual_n(c: f64, m_t: f64, sigma: &Sigma) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param(
            "concentration",
            format!("must be > 0, got {c}"),
        ));
    }
    if !(m_t > 0.0) || !m_t.is_finite() {
        return Err(Error::param("m_t", format!("must be > 0, got {m_t}")));
    }
    Ok((2f64.sqrt() * PI.powf(1.5) * sigma.product() * c / m_t).ln())
}

/// One node's contribution to a pair equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeObservation {
    pub pos: Point2,
    pub t: f64,
    pub n: f64,
}

impl NodeObservation {
    fn quadric(&self, wind: Wind, sigma: &Sigma) -> AxisQuadric {
        let center = (self.pos.x - wind.ux * self.t, self.pos.y - wind.uy * self.t);
        AxisQuadric::from_center(center, (sigma.x, sigma.y), self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSolution {
    /// Real part of the root nearer the reference point.
    pub selected: Point2,
    /// Real part of the other root.
    pub other: Point2,
    pub roots: ComplexRootPair,
}

/// Intersects the level sets of two nodes and keeps the root nearer
/// `reference` (usually the grid centroid).
pub fn solve_pair(
    a: &NodeObservation,
    b: &NodeObservation,
    wind: Wind,
    sigma: &Sigma,
    reference: Point2,
) -> Result<PairSolution> {
    for o in [a, b] {
        if !o.n.is_finite() || !o.t.is_finite() {
            return Err(Error::param(
                "observation",
                "time and residual must be finite",
            ));
        }
    }
    let roots = solve_ellipse_pair(&a.quadric(wind, sigma), &b.quadric(wind, sigma))?;
    let r1 = Point2::new(roots.root1.x.re, roots.root1.y.re);
    let r2 = Point2::new(roots.root2.x.re, roots.root2.y.re);
    let (selected, other) = if r2.distance(reference) < r1.distance(reference) {
        (r2, r1)
    } else {
        (r1, r2)
    };
    Ok(PairSolution {
        selected,
        other,
        roots,
    })
}

/// Which voltage is converted back to a concentration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaReference {
    /// The detection voltage as read from the sensor.
    Raw,
    /// The detection voltage minus the node's estimated offset.
    #[default]
    OffsetRemoved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnclaConfig {
    pub sigma: Sigma,
    /// Evaporating surface, m².
    pub area: f64,
    /// Emission time, s.
    pub emission_time: f64,
    pub gamma_reference: GammaReference,
}

impl Default for SnclaConfig {
    fn default() -> Self {
        Self {
            sigma: Sigma::TABLE,
            area: 0.0024,
            emission_time: 0.1,
            gamma_reference: GammaReference::OffsetRemoved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationEstimate {
    pub cluster: ClusterId,
    pub pair: usize,
    pub x_hat: f64,
    pub y_hat: f64,
    pub root2: Point2,
    /// True when the two roots were a complex-conjugate pair.
    pub complex: bool,
}

impl LocationEstimate {
    pub fn point(&self) -> Point2 {
        Point2::new(self.x_hat, self.y_hat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPair {
    pub cluster: ClusterId,
    pub pair: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnclaOutput {
    pub clusters: [ClusterId; 2],
    pub estimates: Vec<LocationEstimate>,
    pub wind: WindEstimate,
    pub mass: MassEstimate,
    pub skipped: Vec<SkippedPair>,
}

fn observation(
    d: &DetectionResult,
    grid: &SensorGrid,
    sp: &SensitivityParams,
    cfg: &SnclaConfig,
    m_t: f64,
) -> Result<NodeObservation> {
    let gamma = match cfg.gamma_reference {
        GammaReference::Raw => d.gamma,
        GammaReference::OffsetRemoved => d.gamma - d.rho_o,
    };
    let c = concentration_from_voltage(gamma, sp)?;
    let n = residual_n(c, m_t, &cfg.sigma)?;
    Ok(NodeObservation {
        pos: grid.position(d.node),
        t: d.t,
        n,
    })
}

/// Runs the full estimator on one set of detections.
pub fn sncla(
    detections: &[DetectionResult],
    grid: &SensorGrid,
    sp: &SensitivityParams,
    cfg: &SnclaConfig,
) -> Result<SnclaOutput> {
    cfg.sigma.validate()?;
    let wind = cluster_wind(detections, grid)?;
    let mass = transmitted_mass(wind.wind.ux, wind.wind.uy, cfg.area, cfg.emission_time)?;
    if mass.degenerate {
        return Err(Error::Estimation(
            "estimated wind speed is zero, so the released mass is zero".into(),
        ));
    }
    let clusters = select_clusters(&wind);
    let map = index_detections(detections);
    let centroid = grid.centroid();

    let mut estimates = Vec::new();
    let mut skipped = Vec::new();
    for cluster in clusters {
        for pair in cluster.pairs(grid) {
            let skip = |reason: String| SkippedPair {
                cluster,
                pair: pair.index,
                reason,
            };
            if !wind.pair_velocity(&pair).is_some_and(|v| v.valid) {
                skipped.push(skip("pair has no valid arrival-time velocity".into()));
                continue;
            }
            let obs = [pair.inner, pair.outer].map(|node| {
                map.get(&node)
                    .ok_or_else(|| Error::Estimation(format!("no detection for {node}")))
                    .and_then(|d| observation(d, grid, sp, cfg, mass.m_t))
            });
            let [Ok(a), Ok(b)] = obs else {
                let reason = obs
                    .into_iter()
                    .find_map(|o| o.err())
                    .map(|e| e.to_string())
                    .unwrap_or_default();
                skipped.push(skip(reason));
                continue;
            };
            match solve_pair(&a, &b, wind.wind, &cfg.sigma, centroid) {
                Ok(sol) => estimates.push(LocationEstimate {
                    cluster,
                    pair: pair.index,
                    x_hat: sol.selected.x,
                    y_hat: sol.selected.y,
                    root2: sol.other,
                    complex: sol.roots.is_conjugate() && !sol.roots.root1.is_real(0.0),
                }),
                Err(e) => skipped.push(skip(e.to_string())),
            }
        }
    }
    if estimates.is_empty() {
        return Err(Error::Estimation(format!(
            "no usable node pair in clusters {} and {}",
            clusters[0], clusters[1]
        )));
    }
    estimates.sort_by_key(|e| (e.cluster, e.pair));
    Ok(SnclaOutput {
        clusters,
        estimates,
        wind,
        mass,
        skipped,
    })
}

/// Localisation error of one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterError {
    pub cluster: ClusterId,
    /// Mean over pairs of the per-pair mean distance to the truth, m.
    pub error: f64,
    /// Number of pairs that contributed at least one estimate.
    pub pairs: usize,
}

/// Two-level mean distance per cluster: first over the measurements in which
/// a pair produced an estimate, then over the pairs. Clusters that never
/// produced an estimate are omitted.
pub fn cluster_error(
    per_measurement: &[Vec<LocationEstimate>],
    truth: Point2,
) -> Result<Vec<ClusterError>> {
    if per_measurement.is_empty() {
        return Err(Error::param(
            "estimates",
            "at least one measurement is required",
        ));
    }
    let mut by_pair: BTreeMap<(ClusterId, usize), (f64, usize)> = BTreeMap::new();
    for e in per_measurement.iter().flatten() {
        let slot = by_pair.entry((e.cluster, e.pair)).or_insert((0.0, 0));
        slot.0 += e.point().distance(truth);
        slot.1 += 1;
    }
    let mut by_cluster: BTreeMap<ClusterId, (f64, usize)> = BTreeMap::new();
    for ((cluster, _), (sum, count)) in by_pair {
        let slot = by_cluster.entry(cluster).or_insert((0.0, 0));
        slot.0 += sum / count as f64;
        slot.1 += 1;
    }
    Ok(by_cluster
        .into_iter()
        .map(|(cluster, (sum, pairs))| ClusterError {
            cluster,
            error: sum / pairs as f64,
            pairs,
        })
        .collect())
}
