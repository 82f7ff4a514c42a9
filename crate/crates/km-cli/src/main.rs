mod commands;
mod report;

use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use km_core::minimax::DEFAULT_RESTARTS;
use km_core::rigor::certify::{DEFAULT_MAX_DEPTH, DEFAULT_PRECISION};

use commands::{MinimaxArgs, SchottkyArgs, UsageError};
use report::{RunReport, DEFAULT_DIGITS};

const EXIT_USAGE: u8 = 3;
const PRECISION_ENV: &str = "KM_PRECISION_BITS";

#[derive(Debug, Parser)]
#[command(name = "km", version, about = "Reproducible verification runs for the free-group displacement bounds")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Significant digits for decimal values.
    #[arg(long, default_value_t = DEFAULT_DIGITS, global = true)]
    digits: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecompPreset {
    Log3,
    Dagger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MinimaxPreset {
    Log3,
    Dagger,
    Reduced2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Direct,
    Equalize,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check the prefix-cone partition and rediscover the translation identities.
    VerifyDecomposition {
        #[arg(long, value_enum)]
        preset: DecompPreset,
        #[arg(long, default_value_t = 10)]
        depth: usize,
    },
    /// Minimize the maximum of a displacement-function family.
    SolveMinimax {
        #[arg(long, value_enum)]
        preset: MinimaxPreset,
        #[arg(long, value_enum, default_value_t = Method::Direct)]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = km_core::minimax::DEFAULT_SEED)]
        seed: u64,
        /// Allowed distance from the known optimum.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Run the interval certificates for one lemma, or `all`.
    Certify {
        #[arg(long, default_value = "all")]
        lemma: String,
        /// Working precision in bits (default from KM_PRECISION_BITS, else 256).
        #[arg(long)]
        precision: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
        max_depth: usize,
    },
    /// Numerical probes of the hyperbolic-geometry side.
    Probe {
        #[command(subcommand)]
        kind: Probe,
    },
}

#[derive(Debug, Subcommand)]
enum Probe {
    /// Sample base points for a Schottky pair and compare against the floor.
    Schottky {
        #[arg(long, default_value_t = 3.0)]
        length: f64,
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Cap integral of the squared Poisson kernel, quadrature against closed form.
    CapIntegral {
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, default_value_t = commands::CAP_PANELS)]
        panels: usize,
    },
}

fn precision(flag: Option<u32>) -> Result<u32, UsageError> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match std::env::var(PRECISION_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| UsageError(format!("{PRECISION_ENV}={v:?} is not a bit count"))),
        Err(_) => Ok(DEFAULT_PRECISION),
    }
}

fn run(cli: &Cli) -> Result<RunReport, UsageError> {
    match &cli.cmd {
        Cmd::VerifyDecomposition { preset, depth } => {
            let name = match preset {
                DecompPreset::Log3 => "log3",
                DecompPreset::Dagger => "dagger",
            };
            commands::verify_decomposition(name, *depth)
        }
        Cmd::SolveMinimax { preset, method, restarts, seed, tol } => commands::solve_minimax(&MinimaxArgs {
            preset: match preset {
                MinimaxPreset::Log3 => "log3",
                MinimaxPreset::Dagger => "dagger",
                MinimaxPreset::Reduced2d => "reduced2d",
            },
            method: match method {
                Method::Direct => "direct",
                Method::Equalize => "equalize",
            },
            restarts: *restarts,
            seed: *seed,
            tol: *tol,
        }),
        Cmd::Certify { lemma, precision: p, max_depth } => commands::certify(lemma, precision(*p)?, *max_depth),
        Cmd::Probe { kind: Probe::Schottky { length, separation, samples, seed } } => {
            commands::probe_schottky(&SchottkyArgs {
                length: *length,
                separation: *separation,
                samples: *samples,
                seed: *seed,
            })
        }
        Cmd::Probe { kind: Probe::CapIntegral { d, a, panels } } => commands::probe_cap(*d, *a, *panels),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if !(1..=17).contains(&cli.digits) {
        eprintln!("error: --digits must be between 1 and 17");
        return ExitCode::from(EXIT_USAGE);
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }

    let start = Instant::now();
    let mut rep = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    rep.wall_time_ms = start.elapsed().as_millis() as u64;
    rep.round_values(cli.digits);
    match cli.format {
        Format::Json => println!("{}", rep.to_json()),
        Format::Text => print!("{}", rep.to_text()),
    }
    ExitCode::from(rep.status.exit_code() as u8)
}
