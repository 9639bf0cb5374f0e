use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qtherm::bench::{self, ExperimentConfig, Level, Method, RunSummary};
use qtherm::Error;

#[derive(Parser)]
#[command(name = "qtherm", version, about = "Quench work statistics for Hubbard chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named figure preset.
    Preset {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run a sweep described by a config file and overrides.
    Sweep(Common),
    /// Run exact and KS side by side.
    Compare(Common),
    /// Self-consistent KS densities only.
    Scf(Common),
    /// Work distribution and density response at the first grid point.
    Pdw(Common),
}

#[derive(Args)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a preset before applying the config file and overrides.
    #[arg(long)]
    preset: Option<String>,
    /// Override a key, e.g. `--set U=0:10:21`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "fd-step")]
    fd_step: Option<String>,
    #[arg(long)]
    dv0: Option<String>,
}

impl Common {
    fn config(&self, preset: Option<&str>) -> qtherm::Result<ExperimentConfig> {
        let mut cfg = match preset.or(self.preset.as_deref()) {
            Some(name) => bench::preset(name)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            let base = if preset.or(self.preset.as_deref()).is_some() {
                format!("preset = {}\n{text}", cfg.name)
            } else {
                text
            };
            cfg = bench::parse_config_str(&base)?;
        }
        for (key, value) in [
            ("tol", &self.tol),
            ("alpha", &self.alpha),
            ("fd_step", &self.fd_step),
            ("dv0", &self.dv0),
        ] {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for item in &self.overrides {
            let (key, value) = item.split_once('=').ok_or(Error::ConfigSyntax {
                line: 0,
                message: format!("override `{item}` is not key=value"),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(summary: &RunSummary, out: &Path) -> ExitCode {
    println!("{} points written to {}", summary.points, out.display());
    if summary.all_converged() {
        return ExitCode::SUCCESS;
    }
    for label in &summary.unconverged {
        eprintln!("scf not converged: {label}");
    }
    ExitCode::from(3)
}

fn run(cli: Cli) -> qtherm::Result<ExitCode> {
    match cli.command {
        Command::Preset { name, common } => {
            let cfg = common.config(Some(&name))?;
            let s = bench::run_experiment(&cfg, &common.out, common.threads)?;
            Ok(report(&s, &common.out))
        }
        Command::Sweep(common) => {
            let cfg = common.config(None)?;
            let s = bench::run_experiment(&cfg, &common.out, common.threads)?;
            Ok(report(&s, &common.out))
        }
        Command::Compare(common) => {
            let cfg = common.config(None)?;
            let s = bench::compare_methods(&cfg, &common.out, common.threads)?;
            Ok(report(&s, &common.out))
        }
        Command::Scf(common) => {
            let cfg = ExperimentConfig {
                method: Method::Ks,
                level: Level::Densities,
                amplitude_response: false,
                ..common.config(None)?
            };
            let s = bench::run_experiment(&cfg, &common.out, common.threads)?;
            Ok(report(&s, &common.out))
        }
        Command::Pdw(common) => {
            let cfg = ExperimentConfig {
                method: Method::Exact,
                ..common.config(None)?
            };
            let files = bench::write_pdw(&cfg, &common.out)?;
            println!("{} files written to {}", files.len(), common.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                _ if e.is_validation() => ExitCode::from(2),
                Error::NotConverged { .. } => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
