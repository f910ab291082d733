//! `wavefront`: threshold speeds, fronts and weak-form checks from the command line.

mod output;
mod problem;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use wavefront_core::coeffs::{validate, CaseClassification};
use wavefront_core::orchestrator::{
    compute_speed_report, solve_with_report, speed_brackets, Normalization, SolveOptions, SpeedReport, ThresholdName,
};
use wavefront_core::bounds::SpeedBracket;
use wavefront_core::profile::{Junction, RegularityLabel, WaveProfile};
use wavefront_core::shooting::ShootingOptions;
use wavefront_core::verify::{landmark_family, oracle_suite, weak_residual, QuadratureRule, ResidualReport};

use problem::{Preset, ProblemFile, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Domain(#[from] wavefront_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse(_) => 2,
            CliError::Domain(wavefront_core::Error::MalformedCoefficients(_)) => 2,
            CliError::Domain(_) | CliError::Failed(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "wavefront", version, about = "Traveling fronts for diffusion-convection-reaction equations with sign-changing diffusivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON problem file.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Bundled worked example.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Args, Clone, Default)]
struct Tolerances {
    /// Final bisection width (default 1e-6).
    #[arg(long)]
    tol_bisection: Option<f64>,
    /// Relative tolerance of the integrator (default 1e-10).
    #[arg(long)]
    tol_ode: Option<f64>,
    /// Offset from singular ends (default 1e-6).
    #[arg(long)]
    epsilon_start: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sign pattern of D, its zeros and the endpoint data.
    Classify {
        #[command(flatten)]
        source: Source,
    },
    /// Analytic brackets of the sub-thresholds.
    Bounds {
        #[command(flatten)]
        source: Source,
    },
    /// One threshold by bisection (the composite one by default).
    CriticalSpeed {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long, value_enum)]
        threshold: Option<ThresholdArg>,
        /// CSV of the solvable trajectory closest to the threshold.
        #[arg(long)]
        dump_trajectory: Option<PathBuf>,
    },
    /// Every sub-threshold and the composite critical speed.
    Report {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// The front at a given speed: CSV `xi,phi,z,label` plus a JSON sidecar.
    Solve {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        tol: Tolerances,
        /// Wave speed (default: the problem file's, else the critical speed).
        #[arg(long, allow_hyphen_values = true)]
        speed: Option<f64>,
        /// Pin `φ(xi) = phi`, given as `phi,xi`.
        #[arg(long, value_parser = parse_pin, allow_hyphen_values = true)]
        pin: Option<(f64, f64)>,
        /// CSV path; the sidecar goes next to it with extension `.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak-form residuals of a profile written by `solve`.
    Verify {
        /// Sidecar JSON written by `solve`.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 20)]
        bumps: usize,
        /// Bump half-width (default: a quarter of the landmark spread, at most 0.5).
        #[arg(long)]
        width: Option<f64>,
        /// Exit with status 1 above this relative residual.
        #[arg(long, default_value_t = 1e-5)]
        max_relative: f64,
    },
    /// Worked-example checks as a pass/fail table.
    Oracle {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Writes the problem file (presets included) in canonical form.
    Export {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    CPr,
    CNl,
    CPl,
    CNr,
    CAb,
    CBa,
    Composite,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

fn parse_pin(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected phi,xi")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

impl Source {
    fn load(&self) -> Result<ProblemFile, CliError> {
        match (&self.problem, self.preset) {
            (Some(p), _) => ProblemFile::load(p),
            (None, Some(p)) => Ok(p.problem()),
            (None, None) => Err(CliError::Parse("one of --problem or --preset is required".into())),
        }
    }
}

fn shooting_options(tol: &Tolerances, file: &RunOptions) -> ShootingOptions {
    let mut o = ShootingOptions::default();
    if let Some(v) = tol.tol_bisection.or(file.tol_bisection) {
        o.tol_bisection = v;
    }
    if let Some(v) = tol.tol_ode.or(file.tol_ode) {
        o.rtol = v;
    }
    if let Some(v) = tol.epsilon_start.or(file.epsilon_start) {
        o.epsilon_start = v;
    }
    o
}

fn threshold_name(t: ThresholdArg) -> Option<ThresholdName> {
    Some(match t {
        ThresholdArg::CPr => ThresholdName::CPr,
        ThresholdArg::CNl => ThresholdName::CNl,
        ThresholdArg::CPl => ThresholdName::CPl,
        ThresholdArg::CNr => ThresholdName::CNr,
        ThresholdArg::CAb => ThresholdName::CAb,
        ThresholdArg::CBa => ThresholdName::CBa,
        ThresholdArg::Composite => return None,
    })
}

/// Report without the stored probe trajectories.
#[derive(Serialize)]
struct ReportSummary<'a> {
    classification: &'a CaseClassification,
    thresholds: BTreeMap<ThresholdName, f64>,
    composite_name: &'a str,
    composite: f64,
    brackets: &'a BTreeMap<ThresholdName, SpeedBracket>,
    diagnostics: &'a [String],
}

fn summary(r: &SpeedReport) -> ReportSummary<'_> {
    ReportSummary {
        classification: &r.classification,
        thresholds: r.sub_thresholds.iter().map(|(k, v)| (*k, v.c_star)).collect(),
        composite_name: &r.composite_name,
        composite: r.composite,
        brackets: &r.brackets,
        diagnostics: &r.diagnostics,
    }
}

#[derive(Serialize, Deserialize)]
struct Landmarks {
    xi_one: Option<f64>,
    xi_zero: Option<f64>,
    junctions: Vec<Junction>,
}

/// Everything `verify` needs to re-check a solved front.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    problem: ProblemFile,
    speed: f64,
    landmarks: Landmarks,
    labels: Vec<RegularityLabel>,
    profile: WaveProfile,
}

fn print_json<T: Serialize>(v: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::Failed(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{s}").map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), source: e })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Classify { source } => {
            let c = source.load()?.coefficients()?;
            print_json(&validate(&c)?)
        }
        Command::Bounds { source } => {
            let c = source.load()?.coefficients()?;
            print_json(&speed_brackets(&c)?)
        }
        Command::CriticalSpeed { source, tol, threshold, dump_trajectory } => {
            let file = source.load()?;
            let c = file.coefficients()?;
            let report = compute_speed_report(&c, &shooting_options(&tol, &file.options))?;
            let name = threshold.and_then(threshold_name);
            let result = match name {
                Some(n) => report.sub_thresholds.get(&n),
                None => report.sub_thresholds.values().max_by(|a, b| a.c_star.total_cmp(&b.c_star)),
            }
            .ok_or_else(|| CliError::Failed("threshold not part of this sign pattern".into()))?;
            if let Some(path) = dump_trajectory {
                let probe = result
                    .solvable_probe
                    .as_ref()
                    .ok_or_else(|| CliError::Failed("no solvable trajectory was kept".into()))?;
                write_file(&path, &output::trajectory_csv(probe)?)?;
            }
            #[derive(Serialize)]
            struct Out<'a> {
                threshold: &'a str,
                c_star: f64,
                bracket: SpeedBracket,
                search_interval: (f64, f64),
                bisection_width: f64,
            }
            print_json(&Out {
                threshold: name.map_or(report.composite_name.as_str(), |n| n.as_str()),
                c_star: result.c_star,
                bracket: result.bracket_used,
                search_interval: result.search_interval,
                bisection_width: result.bisection_width,
            })
        }
        Command::Report { source, tol } => {
            let file = source.load()?;
            let c = file.coefficients()?;
            let report = compute_speed_report(&c, &shooting_options(&tol, &file.options))?;
            print_json(&summary(&report))
        }
        Command::Solve { source, tol, speed, pin, out } => solve(source.load()?, &tol, speed, pin, out),
        Command::Verify { profile, bumps, width, max_relative } => verify(&profile, bumps, width, max_relative),
        Command::Oracle { format } => {
            let rows = oracle_suite();
            let text = match format {
                Format::Csv => output::oracle_csv(&rows)?,
                Format::Text => output::oracle_text(&rows),
            };
            std::io::stdout().write_all(&text).map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), source: e })?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                return Err(CliError::Failed(format!("{failed} oracle rows failed")));
            }
            Ok(())
        }
        Command::Export { source, out } => {
            let file = source.load()?;
            // re-derive the coefficients so the output is canonical
            let c = file.coefficients()?;
            let canon = ProblemFile::from_coefficients(file.name.clone(), &c, file.options.clone());
            let text = serde_json::to_string_pretty(&canon).map_err(|e| CliError::Failed(e.to_string()))? + "\n";
            match out {
                Some(p) => write_file(&p, text.as_bytes()),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), source: e }),
            }
        }
    }
}

fn solve(file: ProblemFile, tol: &Tolerances, speed: Option<f64>, pin: Option<(f64, f64)>, out: Option<PathBuf>) -> Result<(), CliError> {
    let c = file.coefficients()?;
    let shooting = shooting_options(tol, &file.options);
    let report = compute_speed_report(&c, &shooting)?;
    let speed = speed.or(file.options.speed).unwrap_or(report.composite);
    let normalization = match pin {
        Some((phi, xi)) => Normalization::PinValue { phi, xi },
        None => file.options.normalization.unwrap_or(Normalization::JunctionAtZero),
    };
    let opts = SolveOptions { shooting, normalization, ..SolveOptions::default() };
    let wp = match solve_with_report(&c, speed, &report, &opts) {
        Ok(wp) => wp,
        Err(e @ wavefront_core::Error::NotAdmissible { .. }) => {
            eprintln!("{}", serde_json::to_string_pretty(&summary(&report)).unwrap_or_default());
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let csv = output::profile_csv(&wp)?;
    let Some(path) = out.or(file.options.out.clone()) else {
        return std::io::stdout().write_all(&csv).map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), source: e });
    };
    write_file(&path, &csv)?;
    let sidecar = Sidecar {
        problem: file,
        speed,
        landmarks: Landmarks { xi_one: wp.xi_one(), xi_zero: wp.xi_zero(), junctions: wp.junctions.clone() },
        labels: wp.labels.clone(),
        profile: wp,
    };
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::Failed(e.to_string()))? + "\n";
    write_file(&path.with_extension("json"), text.as_bytes())
}

fn verify(path: &Path, bumps: usize, width: Option<f64>, max_relative: f64) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let side: Sidecar = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let c = side.problem.coefficients()?;
    let wp = &side.profile;
    let width = width.unwrap_or_else(|| {
        let mut pts: Vec<f64> = wp.junctions.iter().map(|j| j.xi).collect();
        pts.extend(wp.xi_one());
        pts.extend(wp.xi_zero());
        let spread = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max) - pts.iter().copied().fold(f64::INFINITY, f64::min);
        if spread > 0.0 { (0.25 * spread).min(0.5) } else { 0.5 }
    });
    let family = landmark_family(wp, width, bumps)?;
    let report: ResidualReport = weak_residual(wp, &c, side.speed, &family, QuadratureRule::default())?;
    #[derive(Serialize)]
    struct Out<'a> {
        speed: f64,
        width: f64,
        pass: bool,
        max_relative_allowed: f64,
        report: &'a ResidualReport,
    }
    let pass = report.max_relative <= max_relative;
    print_json(&Out { speed: side.speed, width, pass, max_relative_allowed: max_relative, report: &report })?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed(format!("max relative residual {} exceeds {max_relative}", report.max_relative)))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
