//! Command-line driver.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or
//! configuration error, 3 numerical error.

pub mod commands;
pub mod config;
pub mod table;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::error::Error;
use config::{RawConfig, SweepRange};
use table::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Memory and noise kernels on the time grid.
    Kernels,
    /// Dissipation u(t) and noise v(t).
    Propagate,
    /// Bound states and steady-state constants.
    Spectrum,
    /// Effective temperature, mean heat and fluctuation-theorem averages in time.
    Heat,
    /// Invariant checks with residuals.
    Verify,
    /// Steady-state and end-of-run statistics across a parameter range.
    Sweep,
    /// Integro-differential solution against exact diagonalization.
    Oracle,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Kernels => "kernels",
            Command::Propagate => "propagate",
            Command::Spectrum => "spectrum",
            Command::Heat => "heat",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qheat", version, about = "Heat statistics of a damped quantum oscillator")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Parameter set: fig2 (Ohmic bath), fig3 or sm1 (coupled-cavity band).
    #[arg(long)]
    preset: Option<String>,
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Sweep one key over n evenly spaced values.
    #[arg(long, value_name = "KEY=LO:HI:N")]
    range: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a line plot next to the CSV.
    #[arg(long)]
    svg: bool,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name), runs and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let text = e.render().to_string();
            let line: Vec<&str> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("For more information"))
                .collect();
            eprintln!("qheat: {}", line.join(" "));
            return EXIT_USAGE;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("qheat: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("qheat: {msg}");
            EXIT_NUMERICAL
        }
    }
}

/// Applies preset, file and flag layers. A range is dropped when a later
/// layer pins the key it sweeps.
fn layered_config(cli: &Cli) -> Result<RawConfig, Failure> {
    let mut layers: Vec<Vec<(String, String)>> = Vec::new();
    if let Some(p) = &cli.preset {
        layers.push(
            config::preset(p)?
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        );
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        layers.push(config::parse_config_text(&text)?);
    }
    layers.push(
        cli.set
            .iter()
            .map(|s| config::parse_assignment(s))
            .collect::<Result<Vec<_>, _>>()?,
    );
    if let Some(r) = &cli.range {
        layers.push(vec![("range".to_string(), r.clone())]);
    }
    let mut raw = RawConfig::default();
    let mut origin = std::collections::BTreeMap::new();
    for (depth, layer) in layers.iter().enumerate() {
        for (k, v) in layer {
            raw.set(k, v);
            origin.insert(k.clone(), depth);
        }
    }
    if let Some(range) = raw.get("range") {
        let swept = SweepRange::parse(range)?.key;
        if origin.get(&swept) > origin.get("range") {
            raw.remove("range");
        }
    }
    Ok(raw)
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let mut raw = layered_config(cli)?;
    let sweeps = matches!(cli.command, Command::Sweep | Command::Spectrum);
    if !sweeps {
        if cli.range.is_some() {
            return Err(Failure::Usage(format!(
                "--range applies to sweep and spectrum, not {}",
                cli.command.name()
            )));
        }
        raw.remove("range");
    }
    if cli.svg && cli.out.is_none() {
        return Err(Failure::Usage("--svg needs --out".into()));
    }
    let range = raw.get("range").map(SweepRange::parse).transpose()?;
    if cli.command == Command::Sweep && range.is_none() {
        return Err(Failure::Usage("sweep needs --range KEY=LO:HI:N".into()));
    }
    if let Some(threads) = std::env::var_os("QHEAT_THREADS") {
        let n: usize = threads
            .to_str()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Failure::Usage("QHEAT_THREADS must be a non-negative integer".into()))?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start {n} threads: {e}")))?;
        return pool.install(|| dispatch(cli, &raw, range));
    }
    dispatch(cli, &raw, range)
}

fn header_for(command: Command, pairs: Vec<(String, String)>) -> Vec<(String, String)> {
    let mut header = vec![("command".to_string(), command.name().to_string())];
    header.extend(pairs);
    header
}

fn dispatch(cli: &Cli, raw: &RawConfig, range: Option<SweepRange>) -> Result<i32, Failure> {
    let (table, code) = match (cli.command, range) {
        (Command::Sweep, Some(r)) | (Command::Spectrum, Some(r)) => {
            let values = r.values();
            let mut first = raw.clone();
            first.set(&r.key, &values[0].to_string());
            let pairs: Vec<_> = first
                .resolve()?
                .resolved_pairs()
                .into_iter()
                .filter(|(k, _)| *k != r.key)
                .collect();
            let header = header_for(cli.command, pairs);
            let table = if cli.command == Command::Sweep {
                commands::sweep(raw, &r.key, &values, header)?
            } else {
                let points = values
                    .iter()
                    .map(|x| {
                        let mut p = raw.clone();
                        p.set(&r.key, &x.to_string());
                        p.resolve()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                commands::spectrum(&points, header)?
            };
            (table, EXIT_OK)
        }
        (command, _) => {
            let cfg = raw.resolve()?;
            let header = header_for(command, cfg.resolved_pairs());
            match command {
                Command::Kernels => (commands::kernels(&cfg, header)?, EXIT_OK),
                Command::Propagate => (commands::propagate(&cfg, header)?, EXIT_OK),
                Command::Spectrum => (commands::spectrum(std::slice::from_ref(&cfg), header)?, EXIT_OK),
                Command::Heat => (commands::heat(&cfg, header)?, EXIT_OK),
                Command::Oracle => (commands::oracle(&cfg, header)?, EXIT_OK),
                Command::Verify => {
                    let (table, failed) = commands::verify(&cfg, header)?;
                    (table, if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
                }
                Command::Sweep => unreachable!("sweep without a range is rejected earlier"),
            }
        }
    };
    emit(&table, cli.out.as_deref(), cli.svg && cli.command != Command::Verify)?;
    Ok(code)
}

fn emit(table: &Table, out: Option<&Path>, svg: bool) -> Result<(), Failure> {
    let csv = table.to_csv();
    match out {
        Some(path) => {
            std::fs::write(path, csv)
                .map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", path.display())))?;
            if svg {
                let svg_path = path.with_extension("svg");
                std::fs::write(&svg_path, table.to_svg())
                    .map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", svg_path.display())))?;
            }
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(csv.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Numerical(format!("cannot write to stdout: {e}")))?;
        }
    }
    Ok(())
}
