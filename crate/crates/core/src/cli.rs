//! Command-line front end.
//!
//! Exit status 0 on success, 1 for invalid input, 2 when a numerical
//! procedure fails. Errors go to stderr as one JSON object.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::diagnostics::{analyze, AnalysisOptions, CollapsibilityEntry, DiagnosticsError};
use crate::fixtures;
use crate::geometry::{
    association_points, standard_population, standardize_table, GeometryError, Preset, RiskPoint,
    StandardPopulation, DEFAULT_TOL,
};
use crate::glm::GlmError;
use crate::json::to_report_string;
use crate::measures::{collapse_analysis, Measure, MeasureError};
use crate::render::figures::{self, fitted_strata, FigureError};
use crate::render::render_figure;
use crate::simulate::{population_truth, sample_table, PopulationSpec, PopulationTruth, SimulateError};
use crate::tables::{self, Format, StratifiedCohortTable, TableError};

#[derive(Debug, Parser)]
#[command(name = "rothman", version, about = "Rothman diagrams for stratified cohort studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PresetArg {
    StudySample,
    Exposed,
    Unexposed,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Preset {
        match p {
            PresetArg::StudySample => Preset::StudySample,
            PresetArg::Exposed => Preset::Exposed,
            PresetArg::Unexposed => Preset::Unexposed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeasureArg {
    Or,
    Rr,
    Rd,
    Hr,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Measure {
        match m {
            MeasureArg::Or => Measure::OddsRatio,
            MeasureArg::Rr => Measure::RiskRatio,
            MeasureArg::Rd => Measure::RiskDifference,
            MeasureArg::Hr => Measure::HazardRatio,
        }
    }
}

#[derive(Debug, Args)]
struct TableInput {
    /// Table file (CSV or JSON), `-` for standard input, or a bundled table
    /// name: whickham, whickham_crude, whickham6
    input: String,
    /// Input format; guessed from the file extension when omitted
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Args)]
struct Output {
    /// Write to this file instead of standard output
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full analysis report
    Analyze {
        #[command(flatten)]
        table: TableInput,
        /// Containment tolerance for the crude point
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Confidence level of likelihood-ratio intervals
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Extra standard population, comma-separated weights (repeatable)
        #[arg(long)]
        weights: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Standardized points
    Standardize {
        #[command(flatten)]
        table: TableInput,
        /// Standard population read off the table (repeatable; all three by default)
        #[arg(long, value_enum)]
        preset: Vec<PresetArg>,
        /// Custom standard population, comma-separated weights (repeatable)
        #[arg(long)]
        weights: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Range of each measure over the standardized hull
    Collapse {
        #[command(flatten)]
        table: TableInput,
        /// Only this measure
        #[arg(long, value_enum)]
        measure: Vec<MeasureArg>,
        /// Use the fitted stratum points of the no-interaction model
        #[arg(long)]
        fitted: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Write one of the standard figures as SVG
    Plot {
        /// Figure number
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
        figure: u8,
        /// Table to draw instead of the bundled one
        input: Option<String>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Output file or directory (default: figN_<name>.svg here)
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Sample a table from a population description (JSON)
    Simulate {
        /// Population description file, or `-` for standard input
        input: String,
        #[arg(long, default_value_t = 1314)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug)]
struct Failure {
    status: i32,
    code: &'static str,
    message: String,
}

impl Failure {
    fn input(code: &'static str, message: impl ToString) -> Self {
        Failure {
            status: 1,
            code,
            message: message.to_string(),
        }
    }

    fn numerical(code: &'static str, message: impl ToString) -> Self {
        Failure {
            status: 2,
            code,
            message: message.to_string(),
        }
    }
}

impl From<TableError> for Failure {
    fn from(e: TableError) -> Self {
        let code = match e {
            TableError::Parse { .. } => "parse",
            _ => "table",
        };
        Failure::input(code, e)
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::input("geometry", e)
    }
}

impl From<DiagnosticsError> for Failure {
    fn from(e: DiagnosticsError) -> Self {
        Failure::input("geometry", e)
    }
}

impl From<GlmError> for Failure {
    fn from(e: GlmError) -> Self {
        match e {
            GlmError::InvalidSpec(_) | GlmError::EmptyMargin { .. } => Failure::input("model", e),
            _ => Failure::numerical("glm", e),
        }
    }
}

impl From<MeasureError> for Failure {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::InsufficientStrata { .. } | MeasureError::Geometry(_) => Failure::input("measure", e),
            _ => Failure::numerical("measure", e),
        }
    }
}

impl From<SimulateError> for Failure {
    fn from(e: SimulateError) -> Self {
        Failure::input("simulate", e)
    }
}

impl From<FigureError> for Failure {
    fn from(e: FigureError) -> Self {
        match e {
            FigureError::Geometry(g) => g.into(),
            FigureError::Glm(g) => g.into(),
            FigureError::Measure(m) => m.into(),
            other => Failure::numerical("figure", other),
        }
    }
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdout: &'a mut dyn Write,
}

fn read_source(path: &str, io: &mut Io) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    if path == "-" {
        io.stdin
            .read_to_end(&mut buf)
            .map_err(|e| Failure::input("io", format!("standard input: {e}")))?;
    } else {
        buf = fs::read(path).map_err(|e| Failure::input("io", format!("{path}: {e}")))?;
    }
    Ok(buf)
}

fn load_table(path: &str, format: Option<FormatArg>, io: &mut Io) -> Result<StratifiedCohortTable, Failure> {
    if path != "-" && !Path::new(path).exists() {
        if let Some(t) = fixtures::builtin(path) {
            return Ok(t);
        }
    }
    let bytes = read_source(path, io)?;
    let format = match format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None if path == "-" => Format::Csv,
        None => Format::from_path(path),
    };
    Ok(tables::parse_table(bytes.as_slice(), format)?)
}

fn parse_weights(raw: &str) -> Result<StandardPopulation, Failure> {
    let weights = raw
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| Failure::input("usage", format!("weight '{w}' is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StandardPopulation::custom(weights)?)
}

fn emit(text: &str, out: &Output, io: &mut Io) -> Result<(), Failure> {
    match &out.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::input("io", format!("{}: {e}", path.display()))),
        None => io
            .stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input("io", format!("standard output: {e}"))),
    }
}

fn report<T: Serialize>(value: &T) -> String {
    to_report_string(value).expect("reports serialize")
}

#[derive(Serialize)]
struct StandardizedEntry {
    preset: Preset,
    weights: Vec<f64>,
    point: RiskPoint,
}

#[derive(Serialize)]
struct StandardizeReport {
    crude: RiskPoint,
    strata: Vec<RiskPoint>,
    standardized: Vec<StandardizedEntry>,
}

#[derive(Serialize)]
struct CollapseReport {
    points: &'static str,
    strata: Vec<RiskPoint>,
    reports: Vec<CollapsibilityEntry>,
}

#[derive(Serialize)]
struct SimulationReport {
    table: serde_json::Value,
    truth: PopulationTruth,
}

fn execute(cli: Cli, io: &mut Io) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze {
            table,
            tol,
            level,
            weights,
            out,
        } => {
            if !(level > 0.0 && level < 1.0) {
                return Err(Failure::input("usage", format!("--level {level} is not in (0, 1)")));
            }
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(Failure::input("usage", format!("--tol {tol} must be a finite nonnegative number")));
            }
            let t = load_table(&table.input, table.format, io)?;
            let custom = weights.iter().map(|w| parse_weights(w)).collect::<Result<Vec<_>, _>>()?;
            let options = AnalysisOptions {
                tol,
                level,
                custom_standards: custom,
                ..AnalysisOptions::default()
            };
            emit(&analyze(&t, &options)?.to_json(), &out, io)
        }
        Command::Standardize {
            table,
            preset,
            weights,
            out,
        } => {
            let t = load_table(&table.input, table.format, io)?;
            let (crude, strata) = association_points(&t)?;
            let mut populations = Vec::new();
            let presets: Vec<Preset> = if preset.is_empty() && weights.is_empty() {
                Preset::TABLE_PRESETS.to_vec()
            } else {
                preset.into_iter().map(Preset::from).collect()
            };
            for p in presets {
                populations.push(standard_population(&t, p)?);
            }
            for w in &weights {
                populations.push(parse_weights(w)?);
            }
            let standardized = populations
                .iter()
                .map(|std| {
                    Ok(StandardizedEntry {
                        preset: std.preset(),
                        weights: std.weights().to_vec(),
                        point: standardize_table(&t, std)?,
                    })
                })
                .collect::<Result<Vec<_>, GeometryError>>()?;
            emit(
                &report(&StandardizeReport {
                    crude,
                    strata,
                    standardized,
                }),
                &out,
                io,
            )
        }
        Command::Collapse {
            table,
            measure,
            fitted,
            out,
        } => {
            let t = load_table(&table.input, table.format, io)?;
            let measures: Vec<Measure> = if measure.is_empty() {
                Measure::ALL.to_vec()
            } else {
                measure.into_iter().map(Measure::from).collect()
            };
            let (_, observed) = association_points(&t)?;
            let mut reports = Vec::new();
            let mut used = Vec::new();
            for m in measures {
                let strata = if fitted { fitted_strata(&t, m)?.1 } else { observed.clone() };
                reports.push(CollapsibilityEntry::Report(collapse_analysis(m, &strata)?));
                used = strata;
            }
            emit(
                &report(&CollapseReport {
                    points: if fitted { "fitted" } else { "observed" },
                    strata: used,
                    reports,
                }),
                &out,
                io,
            )
        }
        Command::Plot {
            figure,
            input,
            format,
            output,
        } => {
            let table = input.map(|p| load_table(&p, format, io)).transpose()?;
            let svg = render_figure(&figures::figure(figure, table.as_ref())?);
            let name = figures::file_name(figure).expect("figure number validated by the parser");
            let path = match output {
                Some(p) if p.is_dir() => p.join(name),
                Some(p) => p,
                None => PathBuf::from(name),
            };
            fs::write(&path, svg).map_err(|e| Failure::input("io", format!("{}: {e}", path.display())))?;
            let line = json!({ "figure": figure, "path": path.display().to_string() });
            writeln!(io.stdout, "{line}").map_err(|e| Failure::input("io", e))
        }
        Command::Simulate { input, n, seed, out } => {
            let bytes = read_source(&input, io)?;
            let spec: PopulationSpec =
                serde_json::from_slice(&bytes).map_err(|e| Failure::input("parse", format!("population spec: {e}")))?;
            let truth = population_truth(&spec)?;
            let table = sample_table(&spec, n, seed)?;
            emit(
                &report(&SimulationReport {
                    table: tables::to_json_value(&table),
                    truth,
                }),
                &out,
                io,
            )
        }
    }
}

fn write_failure(stderr: &mut dyn Write, code: &str, message: &str) {
    let body = json!({ "error": { "code": code, "message": message } });
    let _ = writeln!(stderr, "{body}");
}

/// Runs the command line against the given streams and returns the exit
/// status.
pub fn run_with<I, T>(argv: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    write_failure(stderr, "usage", e.render().to_string().trim_end());
                    1
                }
            };
        }
    };
    let mut io = Io { stdin, stdout };
    match execute(cli, &mut io) {
        Ok(()) => 0,
        Err(f) => {
            write_failure(stderr, f.code, &f.message);
            f.status
        }
    }
}

/// Runs the command line on the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdin = io::stdin();
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdin.lock(), &mut stdout.lock(), &mut stderr.lock())
}
