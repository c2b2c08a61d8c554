//! Command-line workflows: `validate`, `scan`, `simulate` and `search`.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 feasibility or
//! validation failure, 3 empty search result.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{design_search, validate, DesignReport, Interval, SearchSpace};
use crate::geometry::{detector_separation, Apparatus, Slit};
use crate::montecarlo::{simulate_scan, OutcomeHypothesis, ScanConfig, ScanSummary};
use crate::wavemodel::{detector_intensity, duality_check_within, fringe_spacing, screen_intensity, DualityPoint};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_NO_RESULT: u8 = 3;

pub const COUNTS_HEADER: &str = "x_m,N,N1,N2,misdetected,I1_theory,I2_theory";
pub const CURVES_HEADER: &str = "x_m,I,I1,I2";

#[derive(Debug, Parser)]
#[command(
    name = "mirrorslit",
    version,
    about = "Two-slit experiment with a scanning mirror: design checks and photon-count simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an apparatus against the sampling and misdetection constraints.
    Validate(CommonArgs),
    /// Write noiseless intensity curves on the scan grid.
    Scan(CommonArgs),
    /// Monte Carlo photon counting over the scan grid.
    Simulate(CommonArgs),
    /// Random search for the design with the widest detector separation.
    Search(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// full | exclusive | partial:<D>
    #[arg(long)]
    pub hypothesis: Option<OutcomeHypothesis>,
    #[arg(long)]
    pub no_timestamp: bool,
    #[arg(long)]
    pub freeze_detectors: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Model(#[from] crate::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(crate::Error::InvalidScan(_)) => EXIT_INFEASIBLE,
            _ => EXIT_USAGE,
        }
    }
}

/// Raw config document. Every section is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub apparatus: Option<Apparatus>,
    #[serde(default)]
    pub scan: ScanSection,
    pub hypothesis: Option<OutcomeHypothesis>,
    #[serde(default)]
    pub search: SearchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub points: Option<usize>,
    pub x_positions: Option<Vec<f64>>,
    pub photons_per_position: Option<u64>,
    pub seed: Option<u64>,
    pub freeze_detectors: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub wavelength: Option<Interval>,
    pub slit_separation: Option<Interval>,
    pub screen_distance: Option<Interval>,
    pub mirror_angle: Option<Interval>,
    pub arm_length: Option<Interval>,
    pub aperture: Option<Interval>,
    pub slit_width: Option<f64>,
    pub x_max: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

pub const DEFAULT_POINTS: usize = 41;
pub const DEFAULT_PHOTONS: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SEARCH_SAMPLES: usize = 200;

/// Slack on `D² + V² <= 1` when `V` is fitted from counts rather than exact.
pub const FITTED_DUALITY_TOL: f64 = 0.05;

/// Fully resolved inputs for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub apparatus: Apparatus,
    pub scan: ScanConfig,
    pub hypothesis: OutcomeHypothesis,
    pub search: SearchSpace,
    pub search_samples: usize,
    pub search_seed: u64,
    pub out_dir: PathBuf,
    pub timestamp: bool,
}

impl RunConfig {
    pub fn resolve(file: ConfigFile, args: &CommonArgs) -> Result<Self, CliError> {
        let apparatus = file.apparatus.unwrap_or_else(Apparatus::reference_design);
        apparatus.check()?;
        let f_s = fringe_spacing(&apparatus);

        let s = file.scan;
        let x_positions = match s.x_positions {
            Some(xs) => xs,
            None => {
                let lo = s.x_min.unwrap_or(-3.0 * f_s);
                let hi = s.x_max.unwrap_or(3.0 * f_s);
                let n = s.points.unwrap_or(DEFAULT_POINTS);
                ScanConfig::uniform(lo, hi, n, 1, 0).x_positions
            }
        };
        let scan = ScanConfig {
            x_positions,
            photons_per_position: s.photons_per_position.unwrap_or(DEFAULT_PHOTONS),
            seed: args.seed.or(s.seed).unwrap_or(DEFAULT_SEED),
            freeze_detectors: args.freeze_detectors || s.freeze_detectors.unwrap_or(false),
        };

        let q = file.search;
        let base = SearchSpace::around(&apparatus);
        let search = SearchSpace {
            wavelength: q.wavelength.unwrap_or(base.wavelength),
            slit_separation: q.slit_separation.unwrap_or(base.slit_separation),
            screen_distance: q.screen_distance.unwrap_or(base.screen_distance),
            mirror_angle: q.mirror_angle.unwrap_or(base.mirror_angle),
            arm_length: q.arm_length.unwrap_or(base.arm_length),
            aperture: q.aperture.unwrap_or(base.aperture),
            slit_width: q.slit_width.unwrap_or(base.slit_width),
            x_max: q.x_max,
        };

        Ok(RunConfig {
            apparatus,
            scan,
            hypothesis: args.hypothesis.or(file.hypothesis).unwrap_or(OutcomeHypothesis::FullDuality),
            search,
            search_samples: q.samples.unwrap_or(DEFAULT_SEARCH_SAMPLES),
            search_seed: args.seed.or(q.seed).unwrap_or(DEFAULT_SEED),
            out_dir: args.out.clone(),
            timestamp: !args.no_timestamp,
        })
    }

    pub fn load(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                parse_config(&fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?)?
            }
            None => ConfigFile::default(),
        };
        RunConfig::resolve(file, args)
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T, timestamp: bool) -> String {
    let mut v = serde_json::to_value(value).expect("serializable");
    if timestamp {
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("generated_unix".into(), unix_now().into());
        }
    }
    let mut s = serde_json::to_string_pretty(&v).expect("serializable");
    s.push('\n');
    s
}

fn csv_preamble(timestamp: bool, header: &str) -> String {
    let mut s = String::new();
    if timestamp {
        let _ = writeln!(s, "# generated_unix={}", unix_now());
    }
    s.push_str(header);
    s.push('\n');
    s
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<u8, CliError> {
    let report = validate(&cfg.apparatus, 3.0 * fringe_spacing(&cfg.apparatus))?;
    write_file(&cfg.out_dir, "report.json", &to_json(&report, cfg.timestamp))?;
    Ok(if report.passes() { EXIT_OK } else { EXIT_INFEASIBLE })
}

pub fn curves_csv(app: &Apparatus, xs: &[f64], timestamp: bool) -> String {
    let mut s = csv_preamble(timestamp, CURVES_HEADER);
    for &x in xs {
        let _ = writeln!(
            s,
            "{x},{},{},{}",
            screen_intensity(app, x),
            detector_intensity(app, x, Slit::One),
            detector_intensity(app, x, Slit::Two)
        );
    }
    s
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<u8, CliError> {
    cfg.scan.check(fringe_spacing(&cfg.apparatus))?;
    write_file(&cfg.out_dir, "curves.csv", &curves_csv(&cfg.apparatus, &cfg.scan.x_positions, cfg.timestamp))?;
    Ok(EXIT_OK)
}

pub fn counts_csv(summary: &ScanSummary, timestamp: bool) -> String {
    let mut s = csv_preamble(timestamp, COUNTS_HEADER);
    for r in &summary.records {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.x, r.n, r.n1, r.n2, r.misdetected, r.i1_theory, r.i2_theory);
    }
    s
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    #[serde(rename = "V_total")]
    pub v_total: f64,
    #[serde(rename = "V_1")]
    pub v_1: f64,
    #[serde(rename = "V_2")]
    pub v_2: f64,
    pub misdetection_rate: f64,
    pub duality_satisfied: bool,
    pub duality_slack: f64,
    #[serde(rename = "F_s_m")]
    pub fringe_spacing: f64,
    #[serde(rename = "L12_m")]
    pub l12: f64,
    pub seed: u64,
    pub hypothesis: OutcomeHypothesis,
    pub photons_per_position: u64,
    pub design_passes: bool,
    pub warnings: Vec<String>,
}

pub fn summary_file(cfg: &RunConfig, summary: &ScanSummary) -> Result<SummaryFile, CliError> {
    let app = &cfg.apparatus;
    let f_s = fringe_spacing(app);
    let point = DualityPoint::new(summary.hypothesis.distinguishability(), summary.v_total)?;
    let duality = duality_check_within(point, FITTED_DUALITY_TOL);
    Ok(SummaryFile {
        v_total: summary.v_total,
        v_1: summary.v_1,
        v_2: summary.v_2,
        misdetection_rate: summary.misdetection_rate,
        duality_satisfied: duality.satisfied,
        duality_slack: duality.slack,
        fringe_spacing: f_s,
        l12: detector_separation(app, 0.0).map(|s| s.exact).unwrap_or(0.0),
        seed: cfg.scan.seed,
        hypothesis: summary.hypothesis,
        photons_per_position: cfg.scan.photons_per_position,
        design_passes: validate(app, 3.0 * f_s).is_ok_and(|r| r.passes()),
        warnings: summary.warnings.clone(),
    })
}

/// Writes `counts.csv` and `summary.json`; exits 2 when the apparatus fails
/// design validation (files are still written).
pub fn cmd_simulate(cfg: &RunConfig) -> Result<u8, CliError> {
    let summary = simulate_scan(&cfg.apparatus, &cfg.scan, &cfg.hypothesis)?;
    let file = summary_file(cfg, &summary)?;
    write_file(&cfg.out_dir, "counts.csv", &counts_csv(&summary, cfg.timestamp))?;
    write_file(&cfg.out_dir, "summary.json", &to_json(&file, cfg.timestamp))?;
    Ok(if file.design_passes { EXIT_OK } else { EXIT_INFEASIBLE })
}

#[derive(Debug, Serialize)]
struct SearchReport<'a> {
    evaluated: usize,
    feasible: usize,
    seed: u64,
    report: &'a DesignReport,
}

pub fn cmd_search(cfg: &RunConfig) -> Result<u8, CliError> {
    let outcome = design_search(&cfg.search, cfg.search_samples, cfg.search_seed)?;
    let Some((best, report)) = &outcome.best else {
        return Ok(EXIT_NO_RESULT);
    };
    write_file(&cfg.out_dir, "best_apparatus.json", &to_json(best, false))?;
    let wrapped =
        SearchReport { evaluated: outcome.evaluated, feasible: outcome.feasible, seed: cfg.search_seed, report };
    write_file(&cfg.out_dir, "report.json", &to_json(&wrapped, cfg.timestamp))?;
    Ok(EXIT_OK)
}

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    type Handler = fn(&RunConfig) -> Result<u8, CliError>;
    let (args, cmd): (&CommonArgs, Handler) = match &cli.command {
        Command::Validate(a) => (a, cmd_validate),
        Command::Scan(a) => (a, cmd_scan),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Search(a) => (a, cmd_search),
    };
    match RunConfig::load(args).and_then(|cfg| cmd(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mirrorslit: {e}");
            e.exit_code()
        }
    }
}
