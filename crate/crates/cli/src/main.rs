use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use koopcert::numerics::write_trajectory_csv;
use koopcert::report::{Problem, Report, TheoremChoice};
use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: koopcert::Error,
    },
    #[error(transparent)]
    Pipeline(#[from] koopcert::Error),
    #[error("cannot write output: {0}")]
    Write(#[from] io::Error),
    #[error("--z0: cannot read {0:?} as a complex number")]
    Point(String),
}

#[derive(Parser, Debug)]
#[command(
    name = "koopcert",
    version,
    about = "Global stability certificates from the Koopman generator"
)]
struct Cli {
    /// Write the report (or CSV) here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for every sampling step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// No summary line on standard error.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Theorem {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Auto,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certified radius of global asymptotic stability.
    Certify {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        theorem: Theorem,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Lyapunov function (epsilon table) at a certified radius.
    Lyapunov {
        spec: PathBuf,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        degree: Option<u32>,
    },
    /// Invariance, decrease, convergence and generator checks.
    Validate {
        spec: PathBuf,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Trajectory CSV from an initial point.
    Simulate {
        spec: PathBuf,
        /// Comma-separated complex coordinates, e.g. `8,8` or `1+2i,-0.5i`.
        #[arg(long, allow_hyphen_values = true)]
        z0: String,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        /// Add a V column using the Lyapunov function certified at this radius.
        #[arg(long)]
        v_rho: Option<f64>,
    },
}

fn load(path: &Path) -> Result<Problem, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.into(),
        source,
    })?;
    Problem::from_json(&text).map_err(|source| CliError::Parse {
        path: path.into(),
        source,
    })
}

fn parse_point(s: &str) -> Result<Vec<Complex64>, CliError> {
    s.split(',')
        .map(|p| Complex64::from_str(p.trim()).map_err(|_| CliError::Point(p.into())))
        .collect()
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn summary(report: &Report) -> String {
    let mut parts = vec![report.command.to_string()];
    if let Some(c) = &report.certificate {
        parts.push(format!(
            "theorem {} rho {} rho_sup {} certified {}",
            c.theorem,
            c.requested_rho,
            c.criterion.rho_sup(),
            c.certified
        ));
    }
    if let Some(v) = &report.validation {
        parts.push(format!("violations {}", v.violations()));
    }
    parts.join(": ")
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let out = cli.out.as_deref();
    let report = match cli.command {
        Command::Certify { spec, theorem, rho } => {
            let theorem = match theorem {
                Theorem::One => TheoremChoice::Polynomial,
                Theorem::Two => TheoremChoice::Analytic,
                Theorem::Auto => TheoremChoice::Auto,
            };
            load(&spec)?.certify(theorem, rho, cli.seed)?
        }
        Command::Lyapunov { spec, rho, degree } => load(&spec)?.lyapunov(rho, degree, cli.seed)?,
        Command::Validate { spec, rho, samples } => {
            load(&spec)?.validate(rho, samples, cli.seed)?
        }
        Command::Simulate {
            spec,
            z0,
            t_end,
            h,
            v_rho,
        } => {
            let problem = load(&spec)?;
            let z0 = parse_point(&z0)?;
            let (traj, v) = problem.simulate(&z0, t_end, h, v_rho)?;
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &traj, v.as_ref())?;
            emit(out, &buf)?;
            if !cli.quiet {
                eprintln!(
                    "simulate: t = {} final norm {:.3e}{}",
                    traj.times.last().copied().unwrap_or(0.0),
                    traj.final_norm(),
                    if traj.exited {
                        " (left the domain)"
                    } else {
                        ""
                    }
                );
            }
            return Ok(if traj.exited { 2 } else { 0 });
        }
    };
    let mut json = report.to_json()?;
    json.push('\n');
    emit(out, json.as_bytes())?;
    if !cli.quiet {
        eprintln!("{}", summary(&report));
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
