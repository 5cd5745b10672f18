use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gasloc::detection::{detect_all, Scheme};
use gasloc::estimation::{cluster_error, sncla, LocationEstimate};
use gasloc::harness::io::{
    csv_files, num, read_detections, read_estimates, read_traces, write_atomic, write_csv,
    write_detections, write_traces,
};
use gasloc::harness::runner::{
    cluster_error_rows, detection_time_rows, estimate_rows, mean_detection_times, run_sweep,
    simulate_all, sweep_rows, wind_row, ESTIMATE_HEADER, SWEEP_HEADER, WIND_HEADER,
};
use gasloc::harness::{ExperimentConfig, SweepRange};
use gasloc::sensor::Trace;
use gasloc::sigproc::{
    default_bins, design_fir, extract_noise, first_half_window, fit_distribution, Family,
    FilterSpec,
};

/// Gas-puff sensor-network simulation, detection and source localisation.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply to anything left out.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Experiment seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Detection scheme.
    #[arg(long, global = true, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    /// Detection threshold: volts for amplitude, joules for energy.
    #[arg(long, global = true, value_name = "X")]
    threshold: Option<f64>,
    /// Threshold grid for `sweep`.
    #[arg(long, global = true, value_name = "LO:HI:STEP", value_parser = parse_sweep)]
    sweep: Option<SweepRange>,
    /// Number of measurements.
    #[arg(long, global = true, value_name = "N")]
    measurements: Option<usize>,
    /// Input file or directory, where a command reads one.
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise one trace file per measurement.
    Simulate,
    /// Detect arrivals in trace files.
    Detect,
    /// Run the clustered localisation on detection files.
    Estimate,
    /// Cluster errors and mean detection times from earlier outputs.
    Evaluate,
    /// Repeat detection and localisation over a threshold grid.
    Sweep,
    /// Split a trace file into filtered signal and noise.
    ExtractNoise,
    /// Fit distributions to the pooled columns of a trace-format file.
    Fit {
        /// Families to fit, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "student_t,log_normal,weibull,inverse_gaussian"
        )]
        families: Vec<String>,
        /// Histogram bins; Freedman–Diaconis when omitted.
        #[arg(long)]
        bins: Option<usize>,
        /// Keep only the first 90 s of every column.
        #[arg(long)]
        first_90s: bool,
    },
    /// Design the low-pass filter and write its taps.
    DesignFilter,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse()
}

fn parse_sweep(s: &str) -> Result<SweepRange, String> {
    s.parse().map_err(|e: gasloc::Error| e.to_string())
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = c.measurements {
        cfg.measurements = m;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = c.scheme {
        cfg.detection.scheme = s;
    }
    if let Some(t) = c.threshold {
        cfg.detection = cfg.detection.with_threshold(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Files to process: the input itself, every CSV in an input directory, or
/// every CSV in `fallback`.
fn inputs(input: Option<&Path>, fallback: &Path) -> Result<Vec<PathBuf>> {
    let path = input.unwrap_or(fallback);
    let files = if path.is_dir() {
        csv_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        bail!("no CSV files in {}", path.display());
    }
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let grid = cfg.grid.build()?;
    let measurements = simulate_all(cfg, &grid)?;
    for m in &measurements {
        write_traces(
            &cfg.out_dir
                .join("traces")
                .join(format!("m{:03}.csv", m.index)),
            &m.traces,
        )?;
    }
    write_csv(
        &cfg.out_dir.join("truth.csv"),
        &["measurement", "ux", "uy", "mT", "x_T", "y_T"],
        measurements.iter().map(|m| {
            let t = &m.truth;
            vec![
                m.index.to_string(),
                num(t.wind.ux),
                num(t.wind.uy),
                num(t.mass),
                num(t.source.x),
                num(t.source.y),
            ]
        }),
    )?;
    println!(
        "wrote {} trace files to {}",
        measurements.len(),
        cfg.out_dir.join("traces").display()
    );
    Ok(())
}

fn detect(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<()> {
    let grid = cfg.grid.build()?;
    let files = inputs(input, &cfg.out_dir.join("traces"))?;
    for f in &files {
        let traces = read_traces(f, &grid)?;
        let det = detect_all(&traces, &cfg.detection)?;
        let hits = det.iter().filter(|d| d.detected).count();
        let out = cfg
            .out_dir
            .join("detections")
            .join(format!("{}.csv", stem(f)));
        write_detections(&out, &det)?;
        println!(
            "{}: {hits}/{} nodes detected ({})",
            f.display(),
            det.len(),
            cfg.detection.scheme
        );
    }
    Ok(())
}

fn estimate(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<()> {
    let grid = cfg.grid.build()?;
    let files = inputs(input, &cfg.out_dir.join("detections"))?;
    let mut estimates = Vec::new();
    let mut winds = Vec::new();
    let mut failures = Vec::new();
    for (k, f) in files.iter().enumerate() {
        let index = k + 1;
        let det = read_detections(f, &grid)?;
        let result = sncla(&det, &grid, &cfg.sensor, &cfg.estimation).map_err(|e| e.to_string());
        winds.push(wind_row(index, &result));
        match &result {
            Ok(o) => estimates.extend(estimate_rows(index, &o.estimates)),
            Err(e) => failures.push(vec![index.to_string(), e.clone()]),
        }
    }
    write_csv(
        &cfg.out_dir.join("estimates.csv"),
        &ESTIMATE_HEADER,
        estimates,
    )?;
    write_csv(&cfg.out_dir.join("wind.csv"), &WIND_HEADER, winds)?;
    write_csv(
        &cfg.out_dir.join("failures.csv"),
        &["measurement", "error"],
        failures.iter().cloned(),
    )?;
    println!("{} measurements, {} failed", files.len(), failures.len());
    for f in &failures {
        eprintln!("measurement {}: {}", f[0], f[1]);
    }
    Ok(())
}

fn evaluate(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<()> {
    let grid = cfg.grid.build()?;
    let path = input.map_or_else(|| cfg.out_dir.join("estimates.csv"), Path::to_path_buf);
    let rows = read_estimates(&path)?;
    let count = rows.iter().map(|r| r.0).max().unwrap_or(0).max(1);
    let mut per_measurement: Vec<Vec<LocationEstimate>> = vec![Vec::new(); count];
    for (m, e) in rows {
        if m == 0 {
            bail!("{}: measurement numbers start at 1", path.display());
        }
        per_measurement[m - 1].push(e);
    }
    let errors = cluster_error(&per_measurement, cfg.plume.source)?;
    write_csv(
        &cfg.out_dir.join("cluster_error.csv"),
        &["cluster", "error_m", "pairs"],
        cluster_error_rows(&errors),
    )?;
    for e in &errors {
        println!(
            "cluster {}: error {:.6} m over {} pairs",
            e.cluster, e.error, e.pairs
        );
    }

    let det_dir = cfg.out_dir.join("detections");
    if det_dir.is_dir() {
        let detections = csv_files(&det_dir)?
            .iter()
            .map(|f| read_detections(f, &grid))
            .collect::<gasloc::Result<Vec<_>>>()?;
        let times = mean_detection_times(&grid, &detections);
        write_csv(
            &cfg.out_dir.join("detection_times.csv"),
            &["node", "mean_t_s", "detections"],
            detection_time_rows(&times),
        )?;
    }
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, range: Option<SweepRange>) -> Result<()> {
    let scheme = cfg.detection.scheme;
    let range = range.unwrap_or_else(|| SweepRange::default_for(scheme));
    let rows = run_sweep(cfg, scheme, range)?;
    let path = cfg.out_dir.join(format!("sweep_{scheme}.csv"));
    write_csv(&path, &SWEEP_HEADER, sweep_rows(&rows))?;
    println!("{} thresholds written to {}", rows.len(), path.display());
    Ok(())
}

fn filter_for(cfg: &ExperimentConfig, sample_rate: f64) -> Result<gasloc::sigproc::FirFilter> {
    let spec = FilterSpec {
        sample_rate,
        ..cfg.filter
    };
    Ok(design_fir(&spec)?)
}

fn extract(cfg: &ExperimentConfig, input: Option<&Path>) -> Result<()> {
    let grid = cfg.grid.build()?;
    for f in inputs(input, &cfg.out_dir.join("traces"))? {
        let traces = read_traces(&f, &grid)?;
        let filter = filter_for(cfg, traces[0].sample_rate)?;
        let parts = traces
            .iter()
            .map(|t| extract_noise(t, cfg.detection.offset_window, &filter))
            .collect::<gasloc::Result<Vec<_>>>()?;
        let as_traces = |pick: fn(&gasloc::sigproc::NoiseExtraction) -> &Vec<f64>| -> Vec<Trace> {
            traces
                .iter()
                .zip(&parts)
                .map(|(t, p)| Trace::new(t.node, pick(p).clone(), t.sample_rate))
                .collect()
        };
        let dir = cfg.out_dir.join("noise");
        write_traces(
            &dir.join(format!("{}_noise.csv", stem(&f))),
            &as_traces(|p| &p.noise),
        )?;
        write_traces(
            &dir.join(format!("{}_filtered.csv", stem(&f))),
            &as_traces(|p| &p.filtered),
        )?;
        println!("{}: separated {} traces", f.display(), traces.len());
    }
    Ok(())
}

fn fit(
    cfg: &ExperimentConfig,
    input: Option<&Path>,
    families: &[String],
    bins: Option<usize>,
    first_90s: bool,
) -> Result<()> {
    let Some(input) = input else {
        bail!("`fit` needs --input with a trace-format CSV");
    };
    let grid = cfg.grid.build()?;
    let families = families
        .iter()
        .map(|f| f.parse::<Family>())
        .collect::<gasloc::Result<Vec<_>>>()?;
    let mut samples = Vec::new();
    for f in inputs(Some(input), input)? {
        for t in read_traces(&f, &grid)? {
            let t = if first_90s { first_half_window(&t)? } else { t };
            samples.extend(t.samples);
        }
    }
    let bins = match bins {
        Some(b) => b,
        None => default_bins(&samples)?,
    };
    let mut rows = Vec::new();
    for family in families {
        match fit_distribution(&samples, family, bins) {
            Ok(fit) => {
                println!(
                    "{family}: {}={:.6} {}={:.6} mse={:.6e}",
                    family.param_names()[0],
                    fit.params[0],
                    family.param_names()[1],
                    fit.params[1],
                    fit.mse
                );
                rows.push(vec![
                    family.to_string(),
                    num(fit.params[0]),
                    num(fit.params[1]),
                    num(fit.mse),
                ]);
            }
            Err(e) => {
                eprintln!("{family}: fit failed: {e}");
                rows.push(vec![
                    family.to_string(),
                    "NaN".into(),
                    "NaN".into(),
                    "NaN".into(),
                ]);
            }
        }
    }
    write_csv(
        &cfg.out_dir.join("fit.csv"),
        &["family", "param1", "param2", "mse"],
        rows,
    )?;
    Ok(())
}

fn design(cfg: &ExperimentConfig) -> Result<()> {
    let f = design_fir(&cfg.filter)?;
    let text: String = f.taps.iter().map(|t| format!("{}\n", num(*t))).collect();
    let path = cfg.out_dir.join("filter_taps.txt");
    write_atomic(&path, text.as_bytes())?;
    println!(
        "order {} at {} Hz: passband ripple {:.4e}, stopband peak {:.4e} ({:.1} dB)",
        f.order(),
        f.sample_rate,
        f.passband_ripple,
        f.stopband_ripple,
        -20.0 * f.stopband_ripple.log10()
    );
    println!("taps written to {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common).context("loading configuration")?;
    let input = cli.common.input.as_deref();
    match cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Detect => detect(&cfg, input),
        Command::Estimate => estimate(&cfg, input),
        Command::Evaluate => evaluate(&cfg, input),
        Command::Sweep => sweep(&cfg, cli.common.sweep),
        Command::ExtractNoise => extract(&cfg, input),
        Command::Fit {
            families,
            bins,
            first_90s,
        } => fit(&cfg, input, &families, bins, first_90s),
        Command::DesignFilter => design(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
