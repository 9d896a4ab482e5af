//! `magfrac`: run one experiment from a JSON config and flag overrides.
//!
//! Exit codes: 0 success, 1 numerical-contract or I/O failure, 2 configuration
//! error. Failures print one JSON line `{code, field, message}` on stderr.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use config::{Command, ConfigError, Overrides, RunConfig, Settings};
use run::Failure;

const AFTER_HELP: &str = "\
Config keys (all optional except command): command, domain {kind: interval|rectangle|ball,
bounds, center, radius, n}, s, p, q (number or \"inf\"), r, delta, eps (list), k, samples,
field {kind: zero|constant|rotation|polynomial}, optimizer {restarts, max_iters, armijo_factor,
armijo_c1, gtol, memory, seed}, seed, out, lambda {kind: half|ball}, region
(full|product|complement_of_product), function {kind: random|indicator|example2},
resolution [nx, ny], c, eps_slack, dim.

Defaults: s = 0.5 (0.2 for example1, 0.6 for example2), p = 2, q = 2, r = 1.5 (1.2 for
example2), delta = 0.5, eps = 2^-2..2^-6, k = 10, samples = 50, field zero, seed 0,
domain interval (0, 1) with 64 cells (48 for energy/poincare, 24 for best-constant/punctured,
128 for eigs; unit disk for example1), resolution [4096, 2048], out \"out\".";

#[derive(Parser, Debug)]
#[command(name = "magfrac", version, about = "Magnetic fractional seminorm experiments", after_help = AFTER_HELP)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Command to run.
    #[arg(long, value_enum)]
    command: Option<Command>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every random draw [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: all cores]; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Fractional order in (0, 1).
    #[arg(long = "s")]
    s: Option<f64>,
    /// Integrability exponent of the seminorm, in [1, inf).
    #[arg(long = "p")]
    p: Option<f64>,
    /// Lebesgue exponent in [1, inf], or "inf".
    #[arg(long = "q")]
    q: Option<String>,
    /// Exponent of the complement seminorm, in [1, p).
    #[arg(long = "r")]
    r: Option<f64>,
    /// Distance threshold in (0, 1].
    #[arg(long)]
    delta: Option<f64>,
    /// Cells per axis.
    #[arg(long = "n")]
    n: Option<usize>,
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", f.to_json());
    ExitCode::from(f.code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let field = e
                .get(clap::error::ContextKind::InvalidArg)
                .map(|v| v.to_string().trim_start_matches('-').split(' ').next().unwrap_or("args").to_string())
                .unwrap_or_else(|| "args".into());
            let msg = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            return fail(Failure::config(ConfigError::new(field, msg)));
        }
    };

    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::from_path(path) {
            Ok(c) => c,
            Err(e) => return fail(Failure::config(e)),
        },
        None => RunConfig::default(),
    };
    Overrides {
        command: cli.command,
        out: cli.out,
        seed: cli.seed,
        s: cli.s,
        p: cli.p,
        q: cli.q,
        r: cli.r,
        delta: cli.delta,
        n: cli.n,
    }
    .apply(&mut cfg);
    let settings = match Settings::resolve(cfg) {
        Ok(s) => s,
        Err(e) => return fail(Failure::config(e)),
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return fail(Failure::config(ConfigError::new("threads", "need at least one worker")));
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(Failure::config(ConfigError::new("threads", e.to_string()))),
    };
    match pool.install(|| run::run(&settings)) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(f) => fail(f),
    }
}
