//! Experiment configuration, read from TOML. Every field is optional and
//! falls back to the experimental setup of the reference study.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::DetectionConfig;
use crate::error::{Error, Result};
use crate::estimation::{transmitted_mass, SnclaConfig};
use crate::plume::{PlumeParams, Point2, Point3, Sigma, Wind};
use crate::sensor::{NodeId, NoiseModel, SensitivityParams, SensorGrid};
use crate::sigproc::FilterSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    /// m.
    pub spacing: f64,
    /// Position of node N11, m.
    pub origin: Point2,
    /// Labels of grid positions without a sensor.
    pub excluded: Vec<String>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 5,
            cols: 5,
            spacing: 0.15,
            origin: Point2::default(),
            excluded: vec!["N33".into()],
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<SensorGrid> {
        let excluded = self
            .excluded
            .iter()
            .map(|s| {
                s.parse::<NodeId>()
                    .map_err(|e| Error::param("grid.excluded", e))
            })
            .collect::<Result<Vec<_>>>()?;
        SensorGrid::new(self.rows, self.cols, self.spacing, self.origin, &excluded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlumeConfig {
    /// Transmitter position on the ground, m.
    pub source: Point2,
    /// Nominal wind, m/s.
    pub wind: Wind,
    /// Each measurement draws its wind components uniformly within this
    /// distance of the nominal values, m/s.
    pub wind_spread: f64,
    pub sigma: Sigma,
    /// Released mass, kg. When absent it follows from the evaporation law at
    /// the measurement's wind speed.
    pub mass: Option<f64>,
}

impl Default for PlumeConfig {
    fn default() -> Self {
        Self {
            source: Point2::new(0.3, 0.3),
            wind: Wind::new(-0.03, 0.02),
            wind_spread: 0.0,
            sigma: Sigma::TABLE,
            mass: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub measurements: usize,
    pub out_dir: PathBuf,
    /// Hz.
    pub sample_rate: f64,
    /// Length of each measurement, s.
    pub duration: f64,
    pub grid: GridConfig,
    pub plume: PlumeConfig,
    pub noise: NoiseModel,
    pub sensor: SensitivityParams,
    pub detection: DetectionConfig,
    pub estimation: SnclaConfig,
    pub filter: FilterSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            measurements: 25,
            out_dir: PathBuf::from("out"),
            sample_rate: 10.0,
            duration: 180.0,
            grid: GridConfig::default(),
            plume: PlumeConfig::default(),
            noise: NoiseModel::default(),
            sensor: SensitivityParams::default(),
            detection: DetectionConfig::default(),
            estimation: SnclaConfig::default(),
            filter: FilterSpec::default(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> u64 {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count() as u64
        + 1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.measurements == 0 {
            return Err(Error::param("measurements", "must be >= 1"));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::param("sample_rate", "must be > 0"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::param("duration", "must be > 0"));
        }
        if !(self.plume.wind_spread >= 0.0) {
            return Err(Error::param("plume.wind_spread", "must be >= 0"));
        }
        if let Some(m) = self.plume.mass {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::param("plume.mass", "must be > 0"));
            }
        }
        self.grid.build()?;
        self.plume.sigma.validate()?;
        self.noise.validate()?;
        self.sensor.validate()?;
        self.detection.validate()?;
        Ok(())
    }

    /// The puff released in a measurement with the given wind.
    pub fn plume_for(&self, wind: Wind) -> Result<PlumeParams> {
        let mass = match self.plume.mass {
            Some(m) => m,
            None => {
                transmitted_mass(
                    wind.ux,
                    wind.uy,
                    self.estimation.area,
                    self.estimation.emission_time,
                )?
                .m_t
            }
        };
        Ok(PlumeParams {
            mass,
            source: Point3::new(self.plume.source.x, self.plume.source.y, 0.0),
            wind,
            sigma: self.plume.sigma,
        })
    }
}
