//! Command-line front end.
//!
//! Settings resolve as: command-line flag, then `--config` file, then the
//! built-in defaults for the chosen case and study.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::centralized::{fit_centralized, FieldEstimate, LabeledSample};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiments::{
    lambda_vector, run_connectivity_study, run_convergence_study, sample_scenario, trial_rng,
    write_results_csv, ExperimentConfig, RegressionCase, ResultRow,
};
use crate::fusion::FusionRule;
use crate::kernels::{KernelSpec, Point};
use crate::network::build_disk_topology;
use crate::plot::Chart;
use crate::sn_train::{sensor_estimate, train, Schedule, TrainOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const DEFAULT_GRID_POINTS: usize = 101;

#[derive(Debug, Parser)]
#[command(
    name = "sensornet",
    version,
    about = "Kernel least-squares field estimation in sensor networks",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Centralized fit of a sample file; writes the estimate and grid predictions.
    #[command(allow_negative_numbers = true)]
    Fit,
    /// SN-Train on a sample file or a simulated scenario; writes per-sensor estimates.
    #[command(allow_negative_numbers = true)]
    Train,
    /// Mean test error versus number of sweeps.
    #[command(allow_negative_numbers = true)]
    Convergence,
    /// Mean test error versus communication radius.
    #[command(allow_negative_numbers = true)]
    Connectivity,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON file with any subset of the configuration keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (fit, train) or CSV file (studies).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Also write an SVG chart next to the study CSV.
    #[arg(long, global = true)]
    pub svg: bool,
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    /// CSV with header `x,y` or `x1,x2,y`.
    #[arg(long, global = true, value_name = "PATH")]
    pub samples: Option<PathBuf>,

    #[arg(long, global = true)]
    pub case: Option<RegressionCase>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// linear | affine:<bias> | gaussian:<bandwidth>
    #[arg(long, global = true)]
    pub kernel: Option<KernelSpec>,
    /// single:<id> | knn:<k> | ca (repeatable)
    #[arg(long, global = true)]
    pub fusion: Vec<FusionRule>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Communication radius (train, convergence).
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Comma-separated radius grid (connectivity).
    #[arg(long, global = true, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Number of sweeps.
    #[arg(long = "T", global = true)]
    pub sweeps: Option<usize>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub test_points: Option<usize>,
    #[arg(long, global = true)]
    pub noise_std: Option<f64>,
    #[arg(long, global = true)]
    pub single_sensor: Option<usize>,
    /// Regularizer of the centralized fit.
    #[arg(long, global = true)]
    pub central_lambda: Option<f64>,
    /// Fit: the ridge parameter. Train: the same regularizer for every sensor.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Number of prediction grid points per axis (fit).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Run trials one after another.
    #[arg(long, global = true)]
    pub sequential: bool,
}

/// The on-disk configuration: every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub case: Option<RegressionCase>,
    pub kernel: Option<KernelSpec>,
    pub noise_std: Option<f64>,
    pub n: Option<usize>,
    pub radius: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub kappa: Option<f64>,
    pub sweeps: Option<usize>,
    pub trials: Option<usize>,
    pub test_points: Option<usize>,
    pub seed: Option<u64>,
    pub fusion: Option<Vec<FusionRule>>,
    pub single_sensor: Option<usize>,
    pub central_lambda: Option<f64>,
    pub schedule: Option<Schedule>,
    pub execution: Option<Execution>,
    pub lambda: Option<f64>,
    pub grid_points: Option<usize>,
}

/// Fully resolved settings; its JSON form is accepted back by `--config`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub lambda: Option<f64>,
    pub grid_points: usize,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Applies defaults, then the file, then the flags.
pub fn resolve(command: Command, file: &ConfigFile, flags: &Overrides) -> Result<RunConfig> {
    let case = flags.case.or(file.case).unwrap_or(RegressionCase::Case1);
    let mut e = match command {
        Command::Connectivity => ExperimentConfig::connectivity(case),
        _ => ExperimentConfig::convergence(case),
    };
    let mut lambda = None;
    let mut grid_points = DEFAULT_GRID_POINTS;

    macro_rules! patch {
        ($src:expr, $($field:ident => $dst:expr),* $(,)?) => {
            $( if let Some(v) = $src.$field.clone() { $dst = v; } )*
        };
    }
    patch!(file,
        kernel => e.kernel, noise_std => e.noise_std, n => e.n, radius => e.radius,
        radii => e.radii, kappa => e.kappa, sweeps => e.sweeps, trials => e.trials,
        test_points => e.test_points, seed => e.seed, fusion => e.fusion,
        single_sensor => e.single_sensor, schedule => e.schedule,
        execution => e.execution, grid_points => grid_points,
    );
    if file.central_lambda.is_some() {
        e.central_lambda = file.central_lambda;
    }
    if file.lambda.is_some() {
        lambda = file.lambda;
    }

    patch!(flags,
        kernel => e.kernel, noise_std => e.noise_std, n => e.n, r => e.radius,
        radii => e.radii, kappa => e.kappa, sweeps => e.sweeps, trials => e.trials,
        test_points => e.test_points, seed => e.seed, single_sensor => e.single_sensor,
        grid => grid_points,
    );
    if !flags.fusion.is_empty() {
        e.fusion = flags.fusion.clone();
    }
    if flags.central_lambda.is_some() {
        e.central_lambda = flags.central_lambda;
    }
    if flags.lambda.is_some() {
        lambda = flags.lambda;
    }
    if flags.sequential {
        e.execution = Execution::Sequential;
    }

    e.validate()?;
    if let Some(l) = lambda {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::invalid(format!("lambda must be positive, got {l}")));
        }
    }
    if grid_points == 0 {
        return Err(Error::invalid("grid must have at least one point"));
    }
    if command == Command::Connectivity && e.radii.is_empty() {
        return Err(Error::invalid(
            "connectivity study needs at least one radius",
        ));
    }
    Ok(RunConfig {
        experiment: e,
        lambda,
        grid_points,
    })
}

/// Reads labeled samples from CSV: header `x,y` or `x1,…,xd,y`, one row per sample.
pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<LabeledSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let d = cols.len().saturating_sub(1);
    let ok_header = match cols.as_slice() {
        ["x", "y"] => true,
        [xs @ .., "y"] if d >= 1 => xs
            .iter()
            .enumerate()
            .all(|(i, c)| *c == format!("x{}", i + 1)),
        _ => false,
    };
    if !ok_header {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "expected header 'x,y' or 'x1,...,xd,y', found '{}'",
                cols.join(",")
            ),
        });
    }
    let mut samples = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(idx + 2, |p| p.line() as usize);
        if rec.len() != d + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", d + 1, rec.len()),
            });
        }
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("not a number: '{f}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let to_parse = |e: Error| Error::Parse {
            line,
            msg: e.to_string(),
        };
        let p = Point::new(vals[..d].to_vec()).map_err(to_parse)?;
        samples.push(LabeledSample::new(p, vals[d]).map_err(to_parse)?);
    }
    if samples.is_empty() {
        return Err(Error::invalid("sample file contains no rows"));
    }
    Ok(samples)
}

fn load_samples(path: &Path) -> Result<Vec<LabeledSample>> {
    read_samples_csv(File::open(path)?)
}

/// Evenly spaced points covering the samples and `[−1, 1]` on every axis.
fn prediction_grid(samples: &[LabeledSample], per_axis: usize) -> Vec<Point> {
    let d = samples[0].position.dim();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let (lo, hi) = samples.iter().fold((-1.0f64, 1.0f64), |(lo, hi), s| {
                let v = s.position.coords()[a];
                (lo.min(v), hi.max(v))
            });
            if per_axis == 1 {
                return vec![(lo + hi) / 2.0];
            }
            (0..per_axis)
                .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
                .collect()
        })
        .collect();
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut coords = vec![0.0; d];
            for a in (0..d).rev() {
                coords[a] = axes[a][flat % per_axis];
                flat /= per_axis;
            }
            Point::new(coords).expect("grid coordinates are finite")
        })
        .collect()
}

fn coord_header(d: usize) -> Vec<String> {
    if d == 1 {
        vec!["x".into()]
    } else {
        (1..=d).map(|i| format!("x{i}")).collect()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads a `FieldEstimate` written by `fit`.
pub fn read_estimate(path: &Path) -> Result<FieldEstimate> {
    let est: FieldEstimate = serde_json::from_str(&fs::read_to_string(path)?)?;
    FieldEstimate::new(est.kernel, est.centers, est.coeffs)
}

pub fn cmd_fit(
    cfg: &RunConfig,
    samples: &[LabeledSample],
    out_dir: &Path,
) -> Result<FieldEstimate> {
    let m = samples.len();
    let lambda = cfg.lambda.unwrap_or(cfg.experiment.kappa / (m * m) as f64);
    let est = fit_centralized(samples, &cfg.experiment.kernel, lambda)?;
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("estimate.json"), &est)?;

    let d = est.dim();
    let mut w = csv::Writer::from_path(out_dir.join("predictions.csv"))?;
    let mut header = coord_header(d);
    header.push("prediction".into());
    w.write_record(&header)?;
    for p in prediction_grid(samples, cfg.grid_points) {
        let mut rec: Vec<String> = p.coords().iter().map(f64::to_string).collect();
        rec.push(est.predict(&p)?.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(est)
}

#[derive(Debug, Serialize)]
struct SensorEstimateRecord<'a> {
    sensor: usize,
    neighbors: &'a [usize],
    lambda: f64,
    #[serde(flatten)]
    estimate: &'a FieldEstimate,
}

/// Runs SN-Train and writes `estimates.json`, `coefficients.csv` and
/// `diagnostics.csv`. Without a sample file, trial 0 of the configured
/// scenario is simulated and saved as `samples.csv`.
pub fn cmd_train(
    cfg: &RunConfig,
    samples: Option<Vec<LabeledSample>>,
    out_dir: &Path,
) -> Result<Vec<FieldEstimate>> {
    let e = &cfg.experiment;
    fs::create_dir_all(out_dir)?;
    let (positions, y) = match samples {
        Some(s) => s.into_iter().map(|s| (s.position, s.measurement)).unzip(),
        None => {
            let (positions, y) = sample_scenario(e, &mut trial_rng(e.seed, 0));
            let mut w = csv::Writer::from_path(out_dir.join("samples.csv"))?;
            w.write_record(["x", "y"])?;
            for (p, v) in positions.iter().zip(&y) {
                w.write_record([p.coords()[0].to_string(), v.to_string()])?;
            }
            w.flush()?;
            (positions, y)
        }
    };
    let net = build_disk_topology(positions, e.radius)?;
    let lambdas = match cfg.lambda {
        Some(l) => vec![l; net.len()],
        None => lambda_vector(&net, e.kappa)?,
    };
    let options = TrainOptions {
        sweeps: e.sweeps,
        schedule: e.schedule,
        early_stop: None,
    };
    let output = train(&net, &e.kernel, &y, &lambdas, &options)?;
    let estimates: Vec<FieldEstimate> = output
        .states
        .iter()
        .map(|s| sensor_estimate(s, net.positions(), &e.kernel))
        .collect();

    let records: Vec<SensorEstimateRecord> = output
        .states
        .iter()
        .zip(&estimates)
        .map(|(s, est)| SensorEstimateRecord {
            sensor: s.id(),
            neighbors: s.neighbor_ids(),
            lambda: s.lambda(),
            estimate: est,
        })
        .collect();
    write_json(&out_dir.join("estimates.json"), &records)?;

    let mut w = csv::Writer::from_path(out_dir.join("coefficients.csv"))?;
    w.write_record(["sensor", "neighbor", "coeff"])?;
    for s in &output.states {
        for (j, c) in s.neighbor_ids().iter().zip(s.coeffs()) {
            w.write_record([s.id().to_string(), j.to_string(), c.to_string()])?;
        }
    }
    w.flush()?;
    output.diagnostics.write_csv(BufWriter::new(File::create(
        out_dir.join("diagnostics.csv"),
    )?))?;
    Ok(estimates)
}

fn write_study(rows: &[ResultRow], out: &Path, svg: Option<Chart>) -> Result<()> {
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_results_csv(rows, BufWriter::new(File::create(out)?))?;
    if let Some(chart) = svg {
        fs::write(out.with_extension("svg"), chart.to_svg())?;
    }
    Ok(())
}

pub fn cmd_convergence(cfg: &RunConfig, out: &Path, svg: bool) -> Result<Vec<ResultRow>> {
    let rows = run_convergence_study(&cfg.experiment)?;
    let chart = svg.then(|| {
        let title = format!(
            "{}: test error vs sweeps (r = {})",
            cfg.experiment.case.name(),
            cfg.experiment.radius
        );
        Chart::from_rows(&title, "sweeps T", &rows, |r| r.sweeps as f64)
    });
    write_study(&rows, out, chart)?;
    Ok(rows)
}

pub fn cmd_connectivity(cfg: &RunConfig, out: &Path, svg: bool) -> Result<Vec<ResultRow>> {
    let rows = run_connectivity_study(&cfg.experiment)?;
    let chart = svg.then(|| {
        let title = format!(
            "{}: test error vs radius (T = {})",
            cfg.experiment.case.name(),
            cfg.experiment.sweeps
        );
        Chart::from_rows(&title, "radius r", &rows, |r| r.r)
    });
    write_study(&rows, out, chart)?;
    Ok(rows)
}

fn default_out(command: Command) -> PathBuf {
    PathBuf::from(match command {
        Command::Fit => "fit",
        Command::Train => "train",
        Command::Convergence => "convergence.csv",
        Command::Connectivity => "connectivity.csv",
    })
}

/// Executes a parsed command line, writing the effective config to `stdout`
/// when asked.
pub fn run<W: Write>(cli: &Cli, stdout: &mut W) -> Result<()> {
    let flags = &cli.overrides;
    let file = match &flags.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let cfg = resolve(cli.command, &file, flags)?;
    if flags.print_config {
        serde_json::to_writer_pretty(&mut *stdout, &cfg)?;
        writeln!(stdout)?;
        return Ok(());
    }
    let out = flags
        .out
        .clone()
        .unwrap_or_else(|| default_out(cli.command));
    // inputs are read and checked before any computation starts
    let samples = flags.samples.as_deref().map(load_samples).transpose()?;
    match cli.command {
        Command::Fit => {
            let samples = samples.ok_or_else(|| Error::invalid("fit requires --samples <csv>"))?;
            cmd_fit(&cfg, &samples, &out)?;
        }
        Command::Train => {
            cmd_train(&cfg, samples, &out)?;
        }
        Command::Convergence => {
            cmd_convergence(&cfg, &out, flags.svg)?;
        }
        Command::Connectivity => {
            cmd_connectivity(&cfg, &out, flags.svg)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_CONFIG
            }
        }
    }
}
