//! CSV reading and writing. Every file is written to a temporary sibling and
//! renamed into place, so readers never observe a partial file.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::detection::DetectionResult;
use crate::error::{Error, Result};
use crate::estimation::{ClusterId, LocationEstimate};
use crate::plume::Point2;
use crate::sensor::{NodeId, SensorGrid, Trace};

/// Largest accepted relative deviation of any time step from the first one.
pub const RATE_TOLERANCE: f64 = 0.01;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(path, line, e.to_string())
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Builds CSV text in memory from a header and rows.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    write_atomic(path, csv_text(header, rows).as_bytes())
}

/// Shortest decimal text that parses back to the same value.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

/// Trace file: `time_s` then one voltage column per node.
pub fn write_traces(path: &Path, traces: &[Trace]) -> Result<()> {
    let Some(first) = traces.first() else {
        return Err(Error::param("traces", "nothing to write"));
    };
    if traces
        .iter()
        .any(|t| t.len() != first.len() || t.sample_rate != first.sample_rate)
    {
        return Err(Error::param(
            "traces",
            "all traces must share length and sample rate",
        ));
    }
    let labels: Vec<String> = traces.iter().map(|t| t.node.to_string()).collect();
    let mut header = vec!["time_s"];
    header.extend(labels.iter().map(String::as_str));
    let rows = (0..first.len()).map(|n| {
        std::iter::once(num(first.time(n)))
            .chain(traces.iter().map(move |t| num(t.samples[n])))
            .collect::<Vec<_>>()
    });
    write_csv(path, &header, rows)
}

fn parse_f64(path: &Path, line: u64, column: &str, text: &str) -> Result<f64> {
    text.trim().parse::<f64>().map_err(|_| {
        parse_err(
            path,
            line,
            format!("column `{column}`: `{text}` is not a number"),
        )
    })
}

fn check_node(path: &Path, line: u64, label: &str, grid: &SensorGrid) -> Result<NodeId> {
    let node: NodeId = label
        .trim()
        .parse()
        .map_err(|e: String| parse_err(path, line, e))?;
    if !grid.contains(node) {
        let inside = node.row <= grid.rows() && node.col <= grid.cols();
        let why = if inside {
            "is not an occupied sensor position (the transmitter sits there)"
        } else {
            "lies outside the sensor grid"
        };
        return Err(parse_err(
            path,
            line,
            format!("geometry mismatch: node {node} {why}"),
        ));
    }
    Ok(node)
}

/// Reads a trace file, checking it against `grid` and inferring the sample
/// rate from the time column.
pub fn read_traces(path: &Path, grid: &SensorGrid) -> Result<Vec<Trace>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.get(0).map(str::trim) != Some("time_s") {
        return Err(parse_err(path, 1, "first column must be `time_s`"));
    }
    if header.len() < 2 {
        return Err(parse_err(path, 1, "no node columns"));
    }
    let mut seen = HashSet::new();
    let nodes = header
        .iter()
        .skip(1)
        .map(|label| {
            let node = check_node(path, 1, label, grid)?;
            if !seen.insert(node) {
                return Err(parse_err(path, 1, format!("duplicate column {node}")));
            }
            Ok(node)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut times = Vec::new();
    let mut columns = vec![Vec::new(); nodes.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let t = parse_f64(path, line, "time_s", &record[0])?;
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(parse_err(
                    path,
                    line,
                    format!("time {t} does not increase (previous {prev})"),
                ));
            }
        }
        times.push(t);
        for (k, col) in columns.iter_mut().enumerate() {
            col.push(parse_f64(
                path,
                line,
                header.get(k + 1).unwrap_or(""),
                &record[k + 1],
            )?);
        }
    }
    if times.len() < 2 {
        return Err(parse_err(
            path,
            2,
            "need at least two samples to infer the sample rate",
        ));
    }
    let first_step = times[1] - times[0];
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - first_step).abs() > RATE_TOLERANCE * first_step {
            return Err(parse_err(
                path,
                i as u64 + 3,
                format!("non-uniform sample rate: step {step} s differs from the first step {first_step} s by more than 1%"),
            ));
        }
    }
    let mean_step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let rate = 1.0 / mean_step;
    Ok(nodes
        .into_iter()
        .zip(columns)
        .map(|(node, samples)| Trace::new(node, samples, rate))
        .collect())
}

pub const DETECTION_HEADER: [&str; 5] = ["node", "detected", "t_s", "gamma_v", "rho_o_v"];

pub fn detection_rows(detections: &[DetectionResult]) -> impl Iterator<Item = Vec<String>> + '_ {
    detections.iter().map(|d| {
        vec![
            d.node.to_string(),
            d.detected.to_string(),
            num(d.t),
            num(d.gamma),
            num(d.rho_o),
        ]
    })
}

pub fn write_detections(path: &Path, detections: &[DetectionResult]) -> Result<()> {
    write_csv(path, &DETECTION_HEADER, detection_rows(detections))
}

pub fn read_detections(path: &Path, grid: &SensorGrid) -> Result<Vec<DetectionResult>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != DETECTION_HEADER {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`", DETECTION_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != DETECTION_HEADER.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected 5 fields, found {}", record.len()),
            ));
        }
        let node = check_node(path, line, &record[0], grid)?;
        if !seen.insert(node) {
            return Err(parse_err(path, line, format!("duplicate row for {node}")));
        }
        let detected = match record[1].trim() {
            "true" | "1" => true,
            "false" | "0" => false,
            other => {
                return Err(parse_err(
                    path,
                    line,
                    format!("`detected` must be true or false, got `{other}`"),
                ))
            }
        };
        out.push(DetectionResult {
            node,
            detected,
            t: parse_f64(path, line, "t_s", &record[2])?,
            gamma: parse_f64(path, line, "gamma_v", &record[3])?,
            rho_o: parse_f64(path, line, "rho_o_v", &record[4])?,
        });
    }
    Ok(out)
}

/// Reads an estimates table written by the runner, returning the
/// measurement number with each estimate.
pub fn read_estimates(path: &Path) -> Result<Vec<(usize, LocationEstimate)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != crate::harness::runner::ESTIMATE_HEADER {
        return Err(parse_err(
            path,
            1,
            format!(
                "expected header `{}`",
                crate::harness::runner::ESTIMATE_HEADER.join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        let int = |k: usize| {
            record[k].trim().parse::<usize>().map_err(|_| {
                parse_err(
                    path,
                    line,
                    format!("column `{}`: `{}` is not a count", names[k], &record[k]),
                )
            })
        };
        let cluster = u8::try_from(int(1)?)
            .ok()
            .and_then(ClusterId::from_number)
            .ok_or_else(|| parse_err(path, line, format!("cluster `{}` is not 1-4", &record[1])))?;
        let f = |k: usize| parse_f64(path, line, names[k], &record[k]);
        out.push((
            int(0)?,
            LocationEstimate {
                cluster,
                pair: int(2)?,
                x_hat: f(3)?,
                y_hat: f(4)?,
                root2: Point2::new(f(5)?, f(6)?),
                complex: false,
            },
        ));
    }
    Ok(out)
}

/// Sorted list of `*.csv` files in `dir`.
pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}
