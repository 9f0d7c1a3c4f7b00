//! Argument parsing and command dispatch.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use waring_core::{coverage_grid, CaptureCounts, GridSpec, LengthCap, LengthOptions, MethodSpec};

use crate::report::{self, MethodName, ReportError};

#[derive(Debug, Parser)]
#[command(
    name = "waring",
    version,
    about = "Population size inference for two-source capture-recapture"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Credible and confidence intervals for N from observed counts.
    Interval(IntervalArgs),
    /// Prior 95th percentiles of K for ell in {2, 2.2, 3}.
    Table1(TableArgs),
    /// Intervals for the four reference data sets.
    Table2(Table2Args),
    /// Exact coverage over a grid of detection probabilities.
    Coverage(CoverageArgs),
    /// Relative lengths of the GWD (ell = 2) and Tlogit intervals.
    Lengths(LengthsArgs),
    /// Serve the JSON API (and optionally static assets).
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct IntervalArgs {
    #[arg(long)]
    pub n10: u64,
    #[arg(long)]
    pub n01: u64,
    #[arg(long)]
    pub n11: u64,
    /// Tail parameter of the Waring prior.
    #[arg(long, default_value_t = 2.0)]
    pub ell: f64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Comma-separated: gwd, tlogit, wald, lognormal, wald_chapman, gwd_normal_approx.
    #[arg(long, value_delimiter = ',', default_values_t = ["gwd".to_string(), "tlogit".into(), "wald".into(), "lognormal".into()])]
    pub methods: Vec<String>,
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    pub format: TextFormat,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    pub format: TextFormat,
}

#[derive(Debug, Args)]
pub struct Table2Args {
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    pub format: TextFormat,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// Population size.
    #[arg(long = "n", short = 'N')]
    pub n: u64,
    /// `start:stop:step` for both axes, or a comma-separated list of values.
    #[arg(long, default_value = "0.1:0.9:0.05")]
    pub grid: String,
    /// Comma-separated methods, e.g. gwd:2,gwd:3,tlogit.
    #[arg(long, value_delimiter = ',', default_values_t = ["gwd:2".to_string(), "gwd:3".into(), "tlogit".into()])]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = FileFormat::Csv)]
    pub format: FileFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapKind {
    Relative,
    Absolute,
}

#[derive(Debug, Args)]
pub struct LengthsArgs {
    /// Population size.
    #[arg(long = "n", short = 'N')]
    pub n: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Samples where either length exceeds this are discarded.
    #[arg(long, default_value_t = 50.0)]
    pub cap: f64,
    #[arg(long, value_enum, default_value_t = CapKind::Relative)]
    pub cap_kind: CapKind,
    /// Measure unrounded interval endpoints.
    #[arg(long)]
    pub raw_endpoints: bool,
    /// Per-sample CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON output; standard output when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "WARING_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Directory of static files served under `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io {
        path: Option<PathBuf>,
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => f.write_str(m),
            CliError::Io {
                path: Some(p),
                source,
            } => write!(f, "{}: {source}", p.display()),
            CliError::Io { path: None, source } => write!(f, "{source}"),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<waring_core::Error> for CliError {
    fn from(e: waring_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn stdout_err(source: io::Error) -> CliError {
    CliError::Io { path: None, source }
}

/// Parse a grid given as `start:stop:step` or as a list of values.
pub fn parse_grid(s: &str) -> Result<GridSpec, CliError> {
    let bad = |m: &str| CliError::Input(format!("invalid grid `{s}`: {m}"));
    let s = s.trim();
    if s.is_empty() {
        return Err(bad("empty grid"));
    }
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("expected start:stop:step"))?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        GridSpec::regular(start, stop, step).map_err(|e| bad(&e.to_string()))
    } else {
        let values: Vec<f64> = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("expected comma-separated probabilities"))?;
        if values.is_empty() {
            return Err(bad("empty grid"));
        }
        if let Some(v) = values.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(bad(&format!("{v} is not strictly between 0 and 1")));
        }
        Ok(GridSpec {
            p1: values.clone(),
            p2: values,
        })
    }
}

pub fn parse_methods(names: &[String]) -> Result<Vec<MethodName>, CliError> {
    if names.is_empty() {
        return Err(CliError::Input("no methods given".into()));
    }
    names
        .iter()
        .map(|m| m.parse().map_err(CliError::Input))
        .collect()
}

pub fn parse_method_specs(names: &[String]) -> Result<Vec<MethodSpec>, CliError> {
    if names.is_empty() {
        return Err(CliError::Input("no methods given".into()));
    }
    names
        .iter()
        .map(|m| m.parse().map_err(CliError::Input))
        .collect()
}

fn open_output(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: Some(path.to_path_buf()),
            source,
        })
}

fn write_to(path: Option<&Path>, stdout: &mut dyn Write, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut f = open_output(p)?;
            f.write_all(body.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|source| CliError::Io {
                    path: Some(p.to_path_buf()),
                    source,
                })
        }
        None => stdout.write_all(body.as_bytes()).map_err(stdout_err),
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn check_level(level: f64) -> Result<(), CliError> {
    report::validate_ell_level(0.0, level).map_err(Into::into)
}

/// Run a parsed command, writing results to `stdout` unless a file is named.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Interval(a) => {
            let methods = parse_methods(&a.methods)?;
            let r = report::interval_report(
                CaptureCounts::new(a.n10, a.n01, a.n11),
                a.ell,
                a.level,
                &methods,
            )?;
            let body = match a.format {
                TextFormat::Text => report::render_interval_report(&r),
                TextFormat::Json => json_line(&r),
            };
            write_to(None, stdout, &body)
        }
        Command::Table1(a) => {
            let cells = report::table1()?;
            let body = match a.format {
                TextFormat::Text => report::render_table1(&cells),
                TextFormat::Json => json_line(&cells),
            };
            write_to(None, stdout, &body)
        }
        Command::Table2(a) => {
            let rows = report::table2(a.level)?;
            let body = match a.format {
                TextFormat::Text => report::render_table2(&rows, a.level),
                TextFormat::Json => json_line(&rows),
            };
            write_to(None, stdout, &body)
        }
        Command::Coverage(a) => {
            check_level(a.level)?;
            let grid = parse_grid(&a.grid)?;
            let methods = parse_method_specs(&a.methods)?;
            let cells = coverage_grid(a.n, &grid, &methods, a.level)?;
            let body = match a.format {
                FileFormat::Csv => {
                    let mut s = String::from(report::COVERAGE_HEADER);
                    s.push('\n');
                    for c in &cells {
                        s.push_str(&report::coverage_csv_row(c));
                        s.push('\n');
                    }
                    s
                }
                FileFormat::Json => {
                    let records: Vec<report::CoverageRecord> =
                        cells.iter().map(Into::into).collect();
                    json_line(&records)
                }
            };
            write_to(a.out.as_deref(), stdout, &body)
        }
        Command::Lengths(a) => {
            check_level(a.level)?;
            if !(a.cap > 0.0) {
                return Err(CliError::Input("cap must be positive".into()));
            }
            let opts = LengthOptions {
                cap: a.cap,
                cap_kind: match a.cap_kind {
                    CapKind::Relative => LengthCap::Relative,
                    CapKind::Absolute => LengthCap::Absolute,
                },
                round_endpoints: !a.raw_endpoints,
                ..LengthOptions::default()
            };
            let r = waring_core::length_study(a.n, a.level, opts)?;
            if let Some(path) = a.out.as_deref() {
                let mut s = String::from(report::LENGTHS_HEADER);
                s.push('\n');
                for row in &r.rows {
                    s.push_str(&report::lengths_csv_row(row));
                    s.push('\n');
                }
                write_to(Some(path), stdout, &s)?;
            }
            let summary = report::LengthSummary::from(&r);
            write_to(a.summary.as_deref(), stdout, &json_line(&summary))
        }
        Command::Serve(a) => {
            let addr = SocketAddr::new(a.host, a.port);
            let runtime = tokio::runtime::Runtime::new().map_err(stdout_err)?;
            runtime
                .block_on(crate::service::serve(addr, a.assets))
                .map_err(|source| CliError::Io { path: None, source })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.1:0.9:0.05").unwrap();
        assert_eq!(g.p1.len(), 17);
        let g = parse_grid("0.2, 0.5").unwrap();
        assert_eq!(g.p2, vec![0.2, 0.5]);
        for bad in ["", ",", "0.5:0.1:0.1", "0:1", "1.5", "a:b:c"] {
            assert!(matches!(parse_grid(bad), Err(CliError::Input(_))), "{bad}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        let io = CliError::Io {
            path: None,
            source: io::Error::other("x"),
        };
        assert_eq!(io.exit_code(), 3);
    }
}
