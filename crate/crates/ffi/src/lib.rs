//! C interface to `gasloc`.
//!
//! Every function returns a [`GaslocStatus`]. On failure a description is
//! kept per thread and can be copied out with [`gasloc_last_error`]. Objects
//! that own Rust data cross the boundary as opaque pointers and are released
//! with their matching `_free` function. Panics never unwind into the caller.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gasloc::detection::{detect, DetectionConfig, DetectionResult, Scheme};
use gasloc::estimation::{sncla, GammaReference, SnclaConfig, SnclaOutput};
use gasloc::harness::runner::{run_experiment, write_report};
use gasloc::harness::ExperimentConfig;
use gasloc::plume::{sensor_concentration, PlumeParams, Point2, Point3, Sigma, Wind};
use gasloc::sensor::{
    concentration_from_voltage, sensed_voltage, voltage_from_concentration, NodeId,
    SensitivityParams, SensorGrid, Trace,
};
use gasloc::sigproc::{apply_fir, design_fir, FilterSpec, FirFilter};
use gasloc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaslocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    OutOfScope = 3,
    ModelDomain = 4,
    DegenerateGeometry = 5,
    NotConverged = 6,
    EstimationFailed = 7,
    FilterDesign = 8,
    Parse = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

impl From<&Error> for GaslocStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => GaslocStatus::InvalidParameter,
            Error::OutOfScope(_) => GaslocStatus::OutOfScope,
            Error::ModelDomain(_) | Error::InversionDomain { .. } => GaslocStatus::ModelDomain,
            Error::DegenerateGeometry(_) => GaslocStatus::DegenerateGeometry,
            Error::NotConverged { .. } | Error::NonFiniteResidual => GaslocStatus::NotConverged,
            Error::WindEstimation | Error::Estimation(_) => GaslocStatus::EstimationFailed,
            Error::FilterDesign(_) => GaslocStatus::FilterDesign,
            Error::Parse { .. } => GaslocStatus::Parse,
            Error::Io { .. } => GaslocStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(GaslocStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let mut msg = e.to_string();
        if let Error::Io { source, .. } = &e {
            msg = format!("{msg}: {source}");
        }
        Failure(GaslocStatus::from(&e), msg)
    }
}

fn null(what: &str) -> Failure {
    Failure(GaslocStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(GaslocStatus::InvalidParameter, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GaslocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            GaslocStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            GaslocStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not UTF-8")))?;
    Ok(Path::new(s))
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string. `*needed` receives the full length including the
/// terminator, so a caller can size the buffer with a first call that passes
/// a null `buf`.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes; `needed` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_last_error(
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> GaslocStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let len = msg.len() + 1;
    if let Some(n) = unsafe { needed.as_mut() } {
        *n = len;
    }
    if buf.is_null() {
        return GaslocStatus::Ok;
    }
    if cap < len {
        return GaslocStatus::BufferTooSmall;
    }
    unsafe {
        ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), msg.len());
        *buf.add(msg.len()) = 0;
    }
    GaslocStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gasloc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sensor response curve and divider circuit.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GaslocSensitivity {
    pub a1: f64,
    pub b1: f64,
    pub d1: f64,
    pub v_in: f64,
    pub r_load: f64,
    pub r_o: f64,
}

impl From<GaslocSensitivity> for SensitivityParams {
    fn from(s: GaslocSensitivity) -> Self {
        SensitivityParams {
            a1: s.a1,
            b1: s.b1,
            d1: s.d1,
            v_in: s.v_in,
            r_load: s.r_load,
            r_o: s.r_o,
        }
    }
}

#[no_mangle]
pub extern "C" fn gasloc_sensitivity_default() -> GaslocSensitivity {
    let s = SensitivityParams::default();
    GaslocSensitivity {
        a1: s.a1,
        b1: s.b1,
        d1: s.d1,
        v_in: s.v_in,
        r_load: s.r_load,
        r_o: s.r_o,
    }
}

/// # Safety
/// `sensor` and `volts` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gasloc_voltage_from_concentration(
    concentration: f64,
    sensor: *const GaslocSensitivity,
    volts: *mut f64,
) -> GaslocStatus {
    guard(|| {
        let sp = SensitivityParams::from(*unsafe { in_ref(sensor, "sensor") }?);
        *unsafe { out_ref(volts, "volts") }? = voltage_from_concentration(concentration, &sp)?;
        Ok(())
    })
}

/// # Safety
/// `sensor` and `concentration` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gasloc_concentration_from_voltage(
    volts: f64,
    sensor: *const GaslocSensitivity,
    concentration: *mut f64,
) -> GaslocStatus {
    guard(|| {
        let sp = SensitivityParams::from(*unsafe { in_ref(sensor, "sensor") }?);
        *unsafe { out_ref(concentration, "concentration") }? =
            concentration_from_voltage(volts, &sp)?;
        Ok(())
    })
}

/// Output voltage the sensor produces at `concentration`. Unlike
/// `gasloc_voltage_from_concentration` this accepts any non-negative input:
/// it saturates above the detection scope and follows the curve below it.
///
/// # Safety
/// `sensor` and `volts` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gasloc_sensed_voltage(
    concentration: f64,
    sensor: *const GaslocSensitivity,
    volts: *mut f64,
) -> GaslocStatus {
    guard(|| {
        let sp = SensitivityParams::from(*unsafe { in_ref(sensor, "sensor") }?);
        sp.validate()?;
        if !(concentration >= 0.0) || !concentration.is_finite() {
            return Err(invalid("concentration must be finite and >= 0"));
        }
        *unsafe { out_ref(volts, "volts") }? = sensed_voltage(concentration, &sp);
        Ok(())
    })
}

/// A puff released on the ground.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GaslocPuff {
    /// kg.
    pub mass: f64,
    pub source_x: f64,
    pub source_y: f64,
    pub wind_x: f64,
    pub wind_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
}

/// Ground-level concentration at `(x, y)` and time `t` after release.
///
/// # Safety
/// `puff` and `concentration` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gasloc_sensor_concentration(
    puff: *const GaslocPuff,
    x: f64,
    y: f64,
    t: f64,
    concentration: *mut f64,
) -> GaslocStatus {
    guard(|| {
        let p = unsafe { in_ref(puff, "puff") }?;
        let params = PlumeParams {
            mass: p.mass,
            source: Point3::new(p.source_x, p.source_y, 0.0),
            wind: Wind::new(p.wind_x, p.wind_y),
            sigma: Sigma::new(p.sigma_x, p.sigma_y, p.sigma_z),
        };
        *unsafe { out_ref(concentration, "concentration") }? =
            sensor_concentration(&params, Point2::new(x, y), t)?;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaslocScheme {
    Amplitude = 0,
    Energy = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GaslocDetectionConfig {
    pub scheme: GaslocScheme,
    /// V.
    pub amplitude_threshold: f64,
    /// J.
    pub energy_threshold: f64,
    pub window: usize,
    pub offset_window: usize,
    /// Ω.
    pub r_load: f64,
}

impl From<GaslocDetectionConfig> for DetectionConfig {
    fn from(c: GaslocDetectionConfig) -> Self {
        DetectionConfig {
            scheme: match c.scheme {
                GaslocScheme::Amplitude => Scheme::Amplitude,
                GaslocScheme::Energy => Scheme::Energy,
            },
            amplitude_threshold: c.amplitude_threshold,
            energy_threshold: c.energy_threshold,
            window: c.window,
            offset_window: c.offset_window,
            r_load: c.r_load,
        }
    }
}

#[no_mangle]
pub extern "C" fn gasloc_detection_config_default() -> GaslocDetectionConfig {
    let d = DetectionConfig::default();
    GaslocDetectionConfig {
        scheme: match d.scheme {
            Scheme::Amplitude => GaslocScheme::Amplitude,
            Scheme::Energy => GaslocScheme::Energy,
        },
        amplitude_threshold: d.amplitude_threshold,
        energy_threshold: d.energy_threshold,
        window: d.window,
        offset_window: d.offset_window,
        r_load: d.r_load,
    }
}

/// Detection outcome at one node. Rows and columns are 1-based.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GaslocDetection {
    pub row: usize,
    pub col: usize,
    pub detected: bool,
    /// s; NaN when nothing was detected.
    pub t: f64,
    /// V; NaN when nothing was detected.
    pub gamma: f64,
    pub rho_o: f64,
}

impl From<DetectionResult> for GaslocDetection {
    fn from(d: DetectionResult) -> Self {
        Self {
            row: d.node.row,
            col: d.node.col,
            detected: d.detected,
            t: d.t,
            gamma: d.gamma,
            rho_o: d.rho_o,
        }
    }
}

impl From<GaslocDetection> for DetectionResult {
    fn from(d: GaslocDetection) -> Self {
        DetectionResult {
            node: NodeId::new(d.row, d.col),
            detected: d.detected,
            t: d.t,
            gamma: d.gamma,
            rho_o: d.rho_o,
        }
    }
}

/// Runs the configured detector on one voltage trace from node `(row, col)`.
///
/// # Safety
/// `samples` must be valid for `len` values; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_detect(
    row: usize,
    col: usize,
    samples: *const f64,
    len: usize,
    sample_rate: f64,
    config: *const GaslocDetectionConfig,
    out: *mut GaslocDetection,
) -> GaslocStatus {
    guard(|| {
        let samples = unsafe { in_slice(samples, len, "samples") }?;
        let cfg = DetectionConfig::from(*unsafe { in_ref(config, "config") }?);
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(invalid("sample_rate must be > 0"));
        }
        let trace = Trace::new(NodeId::new(row, col), samples.to_vec(), sample_rate);
        *unsafe { out_ref(out, "out") }? = detect(&trace, &cfg)?.into();
        Ok(())
    })
}

/// Opaque sensor grid.
pub struct GaslocGrid(SensorGrid);

/// The 5 × 5 grid at 0.15 m spacing with the centre node holding the transmitter.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gasloc_grid_default(out: *mut *mut GaslocGrid) -> GaslocStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = Box::into_raw(Box::new(GaslocGrid(SensorGrid::standard())));
        Ok(())
    })
}

/// Rectangular grid with its first node at `(origin_x, origin_y)`. Excluded
/// nodes are given as parallel row and column arrays.
///
/// # Safety
/// `excluded_rows` and `excluded_cols` must be valid for `excluded_len`
/// values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_grid_new(
    rows: usize,
    cols: usize,
    spacing: f64,
    origin_x: f64,
    origin_y: f64,
    excluded_rows: *const usize,
    excluded_cols: *const usize,
    excluded_len: usize,
    out: *mut *mut GaslocGrid,
) -> GaslocStatus {
    guard(|| {
        let er = unsafe { in_slice(excluded_rows, excluded_len, "excluded_rows") }?;
        let ec = unsafe { in_slice(excluded_cols, excluded_len, "excluded_cols") }?;
        let excluded: Vec<NodeId> = er
            .iter()
            .zip(ec)
            .map(|(&r, &c)| NodeId::new(r, c))
            .collect();
        let grid = SensorGrid::new(
            rows,
            cols,
            spacing,
            Point2::new(origin_x, origin_y),
            &excluded,
        )?;
        *unsafe { out_ref(out, "out") }? = Box::into_raw(Box::new(GaslocGrid(grid)));
        Ok(())
    })
}

/// Number of sensing nodes.
///
/// # Safety
/// `grid` must come from a grid constructor; `count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_grid_node_count(
    grid: *const GaslocGrid,
    count: *mut usize,
) -> GaslocStatus {
    guard(|| {
        let g = unsafe { in_ref(grid, "grid") }?;
        *unsafe { out_ref(count, "count") }? = g.0.nodes().len();
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or come from a grid constructor, and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gasloc_grid_free(grid: *mut GaslocGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GaslocEstimationConfig {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    /// Evaporating surface, m².
    pub area: f64,
    /// s.
    pub emission_time: f64,
    /// Subtract each node's offset from its detection voltage before
    /// inverting the sensor curve.
    pub remove_offset: bool,
}

#[no_mangle]
pub extern "C" fn gasloc_estimation_config_default() -> GaslocEstimationConfig {
    let c = SnclaConfig::default();
    GaslocEstimationConfig {
        sigma_x: c.sigma.x,
        sigma_y: c.sigma.y,
        sigma_z: c.sigma.z,
        area: c.area,
        emission_time: c.emission_time,
        remove_offset: c.gamma_reference == GammaReference::OffsetRemoved,
    }
}

/// One location estimate produced by a node pair.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GaslocLocation {
    /// 1 to 4.
    pub cluster: u8,
    /// 1-based pair index within the cluster.
    pub pair: usize,
    pub x: f64,
    pub y: f64,
    pub complex: bool,
}

/// Opaque result of a localisation run.
pub struct GaslocEstimate(SnclaOutput);

/// Estimates the source from the detections of every grid node.
///
/// # Safety
/// `detections` must be valid for `len` entries; the other pointers must be
/// valid. The result must be released with `gasloc_estimate_free`.
#[no_mangle]
pub unsafe extern "C" fn gasloc_localize(
    grid: *const GaslocGrid,
    detections: *const GaslocDetection,
    len: usize,
    sensor: *const GaslocSensitivity,
    config: *const GaslocEstimationConfig,
    out: *mut *mut GaslocEstimate,
) -> GaslocStatus {
    guard(|| {
        let grid = unsafe { in_ref(grid, "grid") }?;
        let det: Vec<DetectionResult> = unsafe { in_slice(detections, len, "detections") }?
            .iter()
            .map(|&d| d.into())
            .collect();
        let sp = SensitivityParams::from(*unsafe { in_ref(sensor, "sensor") }?);
        let c = unsafe { in_ref(config, "config") }?;
        let cfg = SnclaConfig {
            sigma: Sigma::new(c.sigma_x, c.sigma_y, c.sigma_z),
            area: c.area,
            emission_time: c.emission_time,
            gamma_reference: if c.remove_offset {
                GammaReference::OffsetRemoved
            } else {
                GammaReference::Raw
            },
        };
        let out = unsafe { out_ref(out, "out") }?;
        *out = Box::into_raw(Box::new(GaslocEstimate(sncla(&det, &grid.0, &sp, &cfg)?)));
        Ok(())
    })
}

/// # Safety
/// `estimate` must come from `gasloc_localize`; `count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_estimate_count(
    estimate: *const GaslocEstimate,
    count: *mut usize,
) -> GaslocStatus {
    guard(|| {
        let e = unsafe { in_ref(estimate, "estimate") }?;
        *unsafe { out_ref(count, "count") }? = e.0.estimates.len();
        Ok(())
    })
}

/// # Safety
/// `estimate` must come from `gasloc_localize`; `location` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_estimate_get(
    estimate: *const GaslocEstimate,
    index: usize,
    location: *mut GaslocLocation,
) -> GaslocStatus {
    guard(|| {
        let e = unsafe { in_ref(estimate, "estimate") }?;
        let l =
            e.0.estimates
                .get(index)
                .ok_or_else(|| invalid(format!("index {index} out of range")))?;
        *unsafe { out_ref(location, "location") }? = GaslocLocation {
            cluster: l.cluster.number(),
            pair: l.pair,
            x: l.x_hat,
            y: l.y_hat,
            complex: l.complex,
        };
        Ok(())
    })
}

/// Signed wind velocity and released mass inferred during localisation.
///
/// # Safety
/// `estimate` must come from `gasloc_localize`; the outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_estimate_wind(
    estimate: *const GaslocEstimate,
    ux: *mut f64,
    uy: *mut f64,
    mass: *mut f64,
) -> GaslocStatus {
    guard(|| {
        let e = unsafe { in_ref(estimate, "estimate") }?;
        *unsafe { out_ref(ux, "ux") }? = e.0.wind.wind.ux;
        *unsafe { out_ref(uy, "uy") }? = e.0.wind.wind.uy;
        *unsafe { out_ref(mass, "mass") }? = e.0.mass.m_t;
        Ok(())
    })
}

/// # Safety
/// `estimate` must be null or come from `gasloc_localize`, and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gasloc_estimate_free(estimate: *mut GaslocEstimate) {
    if !estimate.is_null() {
        drop(unsafe { Box::from_raw(estimate) });
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GaslocFilterSpec {
    /// Hz.
    pub passband_edge: f64,
    /// Hz.
    pub stopband_edge: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Even; zero picks the order from the ripple targets.
    pub order: usize,
    /// dB.
    pub passband_ripple: f64,
    /// dB.
    pub stopband_attenuation: f64,
}

impl From<GaslocFilterSpec> for FilterSpec {
    fn from(s: GaslocFilterSpec) -> Self {
        FilterSpec {
            passband_edge: s.passband_edge,
            stopband_edge: s.stopband_edge,
            sample_rate: s.sample_rate,
            order: s.order,
            passband_ripple: s.passband_ripple,
            stopband_attenuation: s.stopband_attenuation,
        }
    }
}

#[no_mangle]
pub extern "C" fn gasloc_filter_spec_default() -> GaslocFilterSpec {
    let s = FilterSpec::default();
    GaslocFilterSpec {
        passband_edge: s.passband_edge,
        stopband_edge: s.stopband_edge,
        sample_rate: s.sample_rate,
        order: s.order,
        passband_ripple: s.passband_ripple,
        stopband_attenuation: s.stopband_attenuation,
    }
}

/// Opaque linear-phase low-pass filter.
pub struct GaslocFilter(FirFilter);

/// # Safety
/// `spec` and `out` must be valid. Release the filter with `gasloc_filter_free`.
#[no_mangle]
pub unsafe extern "C" fn gasloc_filter_design(
    spec: *const GaslocFilterSpec,
    out: *mut *mut GaslocFilter,
) -> GaslocStatus {
    guard(|| {
        let spec = FilterSpec::from(*unsafe { in_ref(spec, "spec") }?);
        let f = design_fir(&spec)?;
        *unsafe { out_ref(out, "out") }? = Box::into_raw(Box::new(GaslocFilter(f)));
        Ok(())
    })
}

/// Copies the taps into `taps`. `*len` always receives the tap count.
///
/// # Safety
/// `filter` must come from `gasloc_filter_design`; `taps` must be null or
/// valid for `cap` values; `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_filter_taps(
    filter: *const GaslocFilter,
    taps: *mut f64,
    cap: usize,
    len: *mut usize,
) -> GaslocStatus {
    guard(|| {
        let f = unsafe { in_ref(filter, "filter") }?;
        let n = f.0.taps.len();
        *unsafe { out_ref(len, "len") }? = n;
        if taps.is_null() {
            return Ok(());
        }
        if cap < n {
            return Err(Failure(
                GaslocStatus::BufferTooSmall,
                format!("{n} taps do not fit in {cap}"),
            ));
        }
        unsafe { ptr::copy_nonoverlapping(f.0.taps.as_ptr(), taps, n) };
        Ok(())
    })
}

/// Measured passband deviation from unity and stopband peak.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_filter_ripple(
    filter: *const GaslocFilter,
    passband: *mut f64,
    stopband: *mut f64,
) -> GaslocStatus {
    guard(|| {
        let f = unsafe { in_ref(filter, "filter") }?;
        *unsafe { out_ref(passband, "passband") }? = f.0.passband_ripple;
        *unsafe { out_ref(stopband, "stopband") }? = f.0.stopband_ripple;
        Ok(())
    })
}

/// Delay-compensated filtering of `input` into `output`, both of length `len`.
///
/// # Safety
/// `filter` must come from `gasloc_filter_design`; `input` and `output` must
/// be valid for `len` values and may not overlap.
#[no_mangle]
pub unsafe extern "C" fn gasloc_filter_apply(
    filter: *const GaslocFilter,
    input: *const f64,
    output: *mut f64,
    len: usize,
) -> GaslocStatus {
    guard(|| {
        let f = unsafe { in_ref(filter, "filter") }?;
        let x = unsafe { in_slice(input, len, "input") }?;
        if len > 0 && output.is_null() {
            return Err(null("output"));
        }
        let y = apply_fir(&f.0, x);
        if len > 0 {
            unsafe { ptr::copy_nonoverlapping(y.as_ptr(), output, len) };
        }
        Ok(())
    })
}

/// # Safety
/// `filter` must be null or come from `gasloc_filter_design`, and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gasloc_filter_free(filter: *mut GaslocFilter) {
    if !filter.is_null() {
        drop(unsafe { Box::from_raw(filter) });
    }
}

/// Opaque experiment configuration.
pub struct GaslocConfig(ExperimentConfig);

/// # Safety
/// `out` must be valid. Release with `gasloc_config_free`.
#[no_mangle]
pub unsafe extern "C" fn gasloc_config_default(out: *mut *mut GaslocConfig) -> GaslocStatus {
    guard(|| {
        *unsafe { out_ref(out, "out") }? =
            Box::into_raw(Box::new(GaslocConfig(ExperimentConfig::default())));
        Ok(())
    })
}

/// Reads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_config_load(
    path: *const c_char,
    out: *mut *mut GaslocConfig,
) -> GaslocStatus {
    guard(|| {
        let cfg = ExperimentConfig::load(unsafe { path_arg(path, "path") }?)?;
        *unsafe { out_ref(out, "out") }? = Box::into_raw(Box::new(GaslocConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `config` must come from a config constructor.
#[no_mangle]
pub unsafe extern "C" fn gasloc_config_set_seed(
    config: *mut GaslocConfig,
    seed: u64,
) -> GaslocStatus {
    guard(|| {
        unsafe { out_ref(config, "config") }?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must come from a config constructor.
#[no_mangle]
pub unsafe extern "C" fn gasloc_config_set_measurements(
    config: *mut GaslocConfig,
    measurements: usize,
) -> GaslocStatus {
    guard(|| {
        unsafe { out_ref(config, "config") }?.0.measurements = measurements;
        Ok(())
    })
}

/// Simulates, detects and localises every measurement and writes the report
/// CSV files into `out_dir`. `*failures` receives the number of measurements
/// without a location estimate.
///
/// # Safety
/// `config` must come from a config constructor; `out_dir` must be a
/// NUL-terminated string; `failures` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn gasloc_run_experiment(
    config: *const GaslocConfig,
    out_dir: *const c_char,
    failures: *mut usize,
) -> GaslocStatus {
    guard(|| {
        let cfg = unsafe { in_ref(config, "config") }?;
        let dir = unsafe { path_arg(out_dir, "out_dir") }?;
        let report = run_experiment(&cfg.0)?;
        write_report(&report, dir)?;
        if let Some(f) = unsafe { failures.as_mut() } {
            *f = report.failures;
        }
        Ok(())
    })
}

/// # Safety
/// `config` must be null or come from a config constructor, and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gasloc_config_free(config: *mut GaslocConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, GaslocStatus::Panic);
        assert_eq!(
            LAST_ERROR.with(|e| e.borrow().clone()),
            "internal panic: boom"
        );
    }

    #[test]
    fn success_clears_the_message() {
        guard(|| Err(invalid("bad")));
        assert_eq!(LAST_ERROR.with(|e| e.borrow().clone()), "bad");
        assert_eq!(guard(|| Ok(())), GaslocStatus::Ok);
        assert!(LAST_ERROR.with(|e| e.borrow().is_empty()));
    }

    #[test]
    fn io_failures_keep_the_cause() {
        let e = Error::Io {
            path: "x.toml".into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "gone"),
        };
        let Failure(status, msg) = e.into();
        assert_eq!(status, GaslocStatus::Io);
        assert_eq!(msg, "cannot access x.toml: gone");
    }

    #[test]
    fn defaults_round_trip_through_the_c_structs() {
        assert_eq!(
            SensitivityParams::from(gasloc_sensitivity_default()),
            SensitivityParams::default()
        );
        assert_eq!(
            DetectionConfig::from(gasloc_detection_config_default()),
            DetectionConfig::default()
        );
        assert_eq!(
            FilterSpec::from(gasloc_filter_spec_default()),
            FilterSpec::default()
        );
    }
}
