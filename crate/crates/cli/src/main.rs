use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zetatrap::harness::{
    ingest_stencil_table, run_convergence, run_field, run_table1, write_field_csv, write_records,
    GridSpec, HarnessError, ProblemConfig,
};
use zetatrap::zetaweights::{build_log_stencil, build_pow_stencil, WeightsError};

#[derive(Parser)]
#[command(
    name = "zetatrap",
    version,
    about = "Zeta-corrected trapezoidal quadrature and Nystrom solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Log,
    Pow,
}

#[derive(Subcommand)]
enum Command {
    /// Print converged correction weights w_0..w_K.
    Weights {
        #[arg(long = "K", conflicts_with = "order")]
        k: Option<usize>,
        /// Nominal order 2K+2 of a log stencil.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, value_enum, default_value = "log")]
        kind: Kind,
        /// Exponent of |x|^-z, required for --kind pow.
        #[arg(long)]
        z: Option<f64>,
    },
    /// Error sweep over N; writes one CSV row per (method, N).
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Condition numbers and GMRES iteration counts.
    Table1 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the solved exterior field on a grid.
    Field {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `x0,x1,nx,y0,y1,ny`; overrides the config's `grid`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Validate an external stencil table.
    IngestCheck { path: PathBuf },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Harness(HarnessError),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}

impl From<WeightsError> for CliError {
    fn from(e: WeightsError) -> Self {
        match e {
            WeightsError::UnsupportedK(_)
            | WeightsError::ExponentOutOfRange(_)
            | WeightsError::InvalidInput(_) => CliError::Usage(e.to_string()),
            other => CliError::Harness(HarnessError::Weights(other)),
        }
    }
}

/// `{:e}` with 16 significant digits and a signed two-digit exponent.
fn sci(x: f64) -> String {
    let s = format!("{x:.15e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn weights(
    k: Option<usize>,
    order: Option<usize>,
    kind: Kind,
    z: Option<f64>,
) -> Result<(), CliError> {
    let k = match (k, order) {
        (Some(k), _) => k,
        (None, Some(o)) => {
            if o < 2 || o % 2 != 0 {
                return Err(CliError::Usage(format!(
                    "--order {o} is not of the form 2K+2"
                )));
            }
            (o - 2) / 2
        }
        (None, None) => return Err(CliError::Usage("one of --K or --order is required".into())),
    };
    let stencil = match (kind, z) {
        (Kind::Log, None) => build_log_stencil(k)?,
        (Kind::Log, Some(_)) => {
            return Err(CliError::Usage("--z only applies to --kind pow".into()))
        }
        (Kind::Pow, Some(z)) => build_pow_stencil(k, z)?,
        (Kind::Pow, None) => return Err(CliError::Usage("--kind pow needs --z".into())),
    };
    for (j, w) in stencil.weights().iter().enumerate() {
        println!("{j} {}", sci(*w));
    }
    eprintln!("order {}", trim_order(stencil.order()));
    Ok(())
}

fn trim_order(o: f64) -> String {
    if o.fract() == 0.0 {
        format!("{o:.0}")
    } else {
        format!("{o:.2}")
    }
}

fn parse_grid(s: &str) -> Result<GridSpec, CliError> {
    let bad = || CliError::Usage(format!("--grid expects x0,x1,nx,y0,y1,ny; got `{s}`"));
    let f: Vec<&str> = s.split(',').map(str::trim).collect();
    if f.len() != 6 {
        return Err(bad());
    }
    let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
    let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad());
    Ok(GridSpec {
        x: [num(0)?, num(1)?],
        nx: int(2)?,
        y: [num(3)?, num(4)?],
        ny: int(5)?,
    })
}

fn eoc_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}_eoc.csv"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Weights { k, order, kind, z } => weights(k, order, kind, z),
        Command::Convergence { config, out } => {
            let cfg = ProblemConfig::load(&config)?;
            let report = run_convergence(&cfg)?;
            report.write_csv(&out)?;
            let fits = eoc_path(&out);
            report.write_fits_csv(&fits)?;
            for f in &report.fits {
                let eoc = f.eoc.map_or("n/a".to_string(), |e| format!("{e:.2}"));
                let nominal = f.order.map_or("spectral".to_string(), trim_order);
                let kappa = match (f.kappa_re, f.kappa_im) {
                    (Some(re), Some(im)) => format!(" kappa={re}{im:+}i"),
                    _ => String::new(),
                };
                println!(
                    "{}{kappa}: EOC {eoc} (nominal {nominal}) over {} points",
                    f.method, f.fit_points
                );
            }
            Ok(())
        }
        Command::Table1 { config, out } => {
            let cfg = ProblemConfig::load(&config)?;
            let rows = run_table1(&cfg)?;
            write_records(&out, &rows)?;
            for r in &rows {
                println!(
                    "{} kappa={}{:+}i N={}: cond {:.3} iterations {}{}",
                    r.method,
                    r.kappa_re,
                    r.kappa_im,
                    r.n,
                    r.cond,
                    r.gmres_iterations,
                    if r.converged { "" } else { " (not converged)" }
                );
            }
            if rows.iter().any(|r| !r.converged) {
                return Err(HarnessError::NonConvergence("see table rows".into()).into());
            }
            Ok(())
        }
        Command::Field { config, out, grid } => {
            let cfg = ProblemConfig::load(&config)?;
            let grid = match (grid, cfg.grid) {
                (Some(g), _) => parse_grid(&g)?,
                (None, Some(g)) => g,
                (None, None) => {
                    return Err(CliError::Usage(
                        "field needs --grid or a `grid` entry in the config".into(),
                    ))
                }
            };
            let rows = run_field(&cfg, &grid)?;
            write_field_csv(&out, cfg.problem, &rows)?;
            Ok(())
        }
        Command::IngestCheck { path } => {
            let t = ingest_stencil_table(&path)?;
            println!(
                "name {} order {} grid {} rows {}",
                t.name,
                t.order,
                if t.on_grid { "on" } else { "off" },
                t.rows.len()
            );
            t.to_correction()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Harness(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
