use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use busnlos::detection::{detect_buses, BoundaryFile, DetectError};
use busnlos::pointcloud::{read_cloud, CloudFormat, ParseError, Point3};
use busnlos::simkit::{run_scenario, Scenario, SimError};
use busnlos::skygeom::{project_boundary, render_skyplot, AzEl, SatMarker, SkyBoundary};
use busnlos::solver::{error_stats, format_table, run_methods, Epoch, EpochResult, ErrorStats, Method, MethodOutcome};
use busnlos::RunConfig;
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "busnlos", version, about = "Bus detection, NLOS exclusion and GNSS positioning")]
struct Cli {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Pcd,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect buses in a point cloud and print their boundaries.
    Detect {
        cloud: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Write the boundaries here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve positions for a file of epochs.
    Solve {
        epochs: PathBuf,
        #[arg(long)]
        boundaries: Option<PathBuf>,
        /// ls, ls-esf, wls-esf, wls-esf-ne or all.
        #[arg(long, default_value = "all", value_parser = parse_methods)]
        method: MethodSet,
        /// Output directory for solutions.json, table.txt and skyplots.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        table: bool,
        /// Write one skyplot SVG per epoch (needs --out).
        #[arg(long)]
        skyplot: bool,
    },
    /// Generate epochs from a scenario and compare the methods on them.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        /// Output directory for epochs.jsonl, report.json and table.txt.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        table: bool,
    },
    /// Render skyplots of the exclusion decisions, one SVG per epoch.
    Skyplot {
        epochs: PathBuf,
        #[arg(long)]
        boundaries: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone)]
struct MethodSet(Vec<Method>);

fn parse_methods(s: &str) -> Result<MethodSet, String> {
    if s.eq_ignore_ascii_case("all") {
        Ok(MethodSet(Method::ALL.to_vec()))
    } else {
        s.parse().map(|m| MethodSet(vec![m]))
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        match e {
            DetectError::InvalidConfig(_) => CliError::Input(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(_) | SimError::Parse(_) => CliError::Input(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::from_json(&read_text(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => Ok(RunConfig::default()),
    }
}

/// Epochs as a JSON array, a single JSON object, or one object per line.
fn parse_epochs(text: &str) -> Result<Vec<Epoch>, CliError> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| CliError::Input(format!("epochs: {e}")));
    }
    if let Ok(single) = serde_json::from_str::<Epoch>(text) {
        return Ok(vec![single]);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Input(format!("epochs line {}: {e}", i + 1))))
        .collect()
}

fn load_epochs(path: &Path) -> Result<Vec<Epoch>, CliError> {
    let epochs = parse_epochs(&read_text(path)?)?;
    for (i, e) in epochs.iter().enumerate() {
        e.validate().map_err(|err| CliError::Input(format!("epoch {i}: {err}")))?;
    }
    Ok(epochs)
}

fn load_boundaries(path: Option<&Path>, cfg: &RunConfig) -> Result<Vec<SkyBoundary>, CliError> {
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let file: BoundaryFile =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    file.boundaries
        .iter()
        .map(|b| project_boundary(b, &cfg.antenna(), cfg.heading_deg).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))))
        .collect()
}

/// Runs every epoch in order, seeding each from the previous LS fix.
fn solve_all(epochs: &[Epoch], boundaries: &[SkyBoundary], cfg: &RunConfig) -> Vec<EpochResult> {
    let solver = cfg.solver();
    let mut previous: Option<Vector3<f64>> = None;
    epochs
        .iter()
        .map(|epoch| {
            let initial = cfg.initial_position_ecef.or(previous).unwrap_or_else(Vector3::zeros);
            let result = run_methods(epoch, boundaries, &solver, &initial);
            if let Some(ls) = result.solution(Method::Ls) {
                previous = Some(ls.position);
            }
            result
        })
        .collect()
}

fn skyplot_files(dir: &Path, results: &[EpochResult], boundaries: &[SkyBoundary]) -> Result<(), CliError> {
    create_dir(dir)?;
    for (i, r) in results.iter().enumerate() {
        let markers: Vec<SatMarker> = r
            .satellites
            .iter()
            .filter(|s| s.azimuth.is_finite() && s.elevation.is_finite())
            .map(|s| SatMarker {
                prn: s.prn.clone(),
                az_el: AzEl::new(s.azimuth, s.elevation),
                snr: s.snr,
                status: s.status,
            })
            .collect();
        write_text(&dir.join(format!("skyplot_{i}.svg")), &render_skyplot(&markers, boundaries))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EpochOutput<'a> {
    time: f64,
    outcomes: Vec<&'a MethodOutcome>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    decisions: &'a [busnlos::ExclusionDecision],
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    epochs: Vec<EpochOutput<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<BTreeMap<Method, ErrorStats>>,
}

fn cmd_detect(cloud: &Path, format: Option<FormatArg>, out: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    let format = format.map(|f| match f {
        FormatArg::Csv => CloudFormat::Csv,
        FormatArg::Pcd => CloudFormat::Pcd,
    });
    let report = read_cloud(cloud, format)?;
    if report.dropped_non_finite > 0 {
        log::warn!("dropped {} points with non-finite coordinates", report.dropped_non_finite);
    }
    let boundaries = detect_buses(&report.cloud, &cfg.detection(), &Point3::ORIGIN)?;
    let text = to_json(&BoundaryFile { boundaries });
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(
    epochs_path: &Path,
    boundaries_path: Option<&Path>,
    methods: &[Method],
    out: Option<&Path>,
    table: bool,
    skyplot: bool,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    if skyplot && out.is_none() {
        return Err(CliError::Input("--skyplot needs --out".into()));
    }
    let epochs = load_epochs(epochs_path)?;
    let boundaries = load_boundaries(boundaries_path, cfg)?;
    if boundaries_path.is_none() && methods.contains(&Method::WlsEsfNe) {
        log::warn!("no boundaries file: WLS-ESF-NE runs without exclusion and matches WLS-ESF");
    }
    let results = solve_all(&epochs, &boundaries, cfg);

    let stats = if !epochs.is_empty() && epochs.iter().all(|e| e.truth.is_some()) {
        let mut map = BTreeMap::new();
        for &m in methods {
            let errors: Vec<Option<f64>> = results.iter().map(|r| r.error_3d(m)).collect();
            if let Ok(s) = error_stats(&errors, &cfg.buckets) {
                map.insert(m, s);
            }
        }
        Some(map)
    } else {
        None
    };
    let output = SolveOutput {
        epochs: results
            .iter()
            .map(|r| EpochOutput {
                time: r.time,
                outcomes: r.outcomes.iter().filter(|o| methods.contains(&o.method)).collect(),
                decisions: if methods.contains(&Method::WlsEsfNe) { &r.decisions } else { &[] },
            })
            .collect(),
        stats,
    };
    let table_text = match (&output.stats, table) {
        (Some(stats), true) => {
            let columns: Vec<(&str, ErrorStats)> = stats.iter().map(|(m, s)| (m.label(), *s)).collect();
            Some(format_table(&columns, &cfg.buckets))
        }
        (None, true) => {
            log::warn!("--table needs truth positions on every epoch");
            None
        }
        _ => None,
    };

    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_text(&dir.join("solutions.json"), &to_json(&output))?;
            if let Some(t) = &table_text {
                write_text(&dir.join("table.txt"), t)?;
                print!("{t}");
            }
            if skyplot {
                skyplot_files(dir, &results, &boundaries)?;
            }
        }
        None => {
            print!("{}", to_json(&output));
            if let Some(t) = &table_text {
                eprint!("{t}");
            }
        }
    }

    let solved_any = results.iter().any(|r| methods.iter().any(|&m| r.solution(m).is_some()));
    if !epochs.is_empty() && !solved_any {
        return Err(CliError::Runtime("no epoch could be solved".into()));
    }
    Ok(())
}

fn cmd_simulate(scenario: &Path, epochs: usize, out: Option<&Path>, table: bool, cfg: &RunConfig) -> Result<(), CliError> {
    let scenario = Scenario::from_json(&read_text(scenario)?)?;
    let run = run_scenario(&scenario, epochs, cfg)?;
    let report = to_json(&run.report);
    match out {
        Some(dir) => {
            create_dir(dir)?;
            let mut lines = String::new();
            for e in &run.epochs {
                lines.push_str(&serde_json::to_string(e).expect("serializable epoch"));
                lines.push('\n');
            }
            write_text(&dir.join("epochs.jsonl"), &lines)?;
            write_text(&dir.join("report.json"), &report)?;
            if table {
                write_text(&dir.join("table.txt"), &run.report.table)?;
                print!("{}", run.report.table);
            }
        }
        None => {
            print!("{report}");
            if table {
                eprint!("{}", run.report.table);
            }
        }
    }
    Ok(())
}

fn cmd_skyplot(epochs: &Path, boundaries_path: Option<&Path>, out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    let epochs = load_epochs(epochs)?;
    let boundaries = load_boundaries(boundaries_path, cfg)?;
    let results = solve_all(&epochs, &boundaries, cfg);
    skyplot_files(out, &results, &boundaries)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    if cli.print_config {
        print!("{}", to_json(&cfg));
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Input("no subcommand given; see --help".into()));
    };
    match command {
        Command::Detect { cloud, format, out } => cmd_detect(&cloud, format, out.as_deref(), &cfg),
        Command::Solve {
            epochs,
            boundaries,
            method,
            out,
            table,
            skyplot,
        } => cmd_solve(&epochs, boundaries.as_deref(), &method.0, out.as_deref(), table, skyplot, &cfg),
        Command::Simulate {
            scenario,
            epochs,
            out,
            table,
        } => cmd_simulate(&scenario, epochs, out.as_deref(), table, &cfg),
        Command::Skyplot { epochs, boundaries, out } => cmd_skyplot(&epochs, boundaries.as_deref(), &out, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
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
