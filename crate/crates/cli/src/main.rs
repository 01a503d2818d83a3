use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{Settings, TaylorMode};
use config::RunConfig;
use output::Format;

/// Lattice energies, continuum coefficients and the microtwin profile problem.
#[derive(Parser, Debug)]
#[command(name = "microtwin", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Numerical tolerance (the default depends on the command).
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Output format [default: csv].
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, env = "MICROTWIN_WORKERS", global = true)]
    workers: Option<usize>,

    /// Comma-separated list of m values.
    #[arg(long, value_delimiter = ',', global = true)]
    m: Option<Vec<usize>>,

    /// Lennard-Jones σ.
    #[arg(long, global = true)]
    sigma: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical slopes a_m (Hessian of F_m at q_m stops being positive definite).
    AmTable,
    /// σG(a_σ, σ, m) and the optimal m.
    GTable,
    /// Compare atomistic energies with the continuum expansion.
    TaylorVerify {
        #[arg(long, value_enum)]
        mode: TaylorMode,
    },
    /// Named constants next to their published values.
    Constants,
    /// Minimise F_m(a, b; ·) over increasing chains.
    ProfileMin {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Number of starting chains (q_m plus perturbations).
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Recover W from T₀W on a grid (Möbius and Neumann paths).
    InvertPotential,
    /// Slope below which the jump curvature A turns negative.
    JumpThreshold,
}

fn run(cli: Cli) -> Result<bool> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let format = cli.format.or(config.format).unwrap_or(Format::Csv);
    let out = cli.out.clone().or_else(|| config.out.clone());
    let workers = cli.workers.or(config.workers);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            anyhow::bail!("--workers must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    let settings = Settings { tol: cli.tol, m: cli.m.clone(), sigma: cli.sigma, config };

    let report = pool.install(|| match &cli.command {
        Command::AmTable => commands::am_table(&settings),
        Command::GTable => commands::g_table(&settings),
        Command::TaylorVerify { mode } => commands::taylor_verify(&settings, *mode),
        Command::Constants => commands::constants(&settings),
        Command::ProfileMin { a, b, starts } => commands::profile_min(&settings, *a, *b, *starts),
        Command::InvertPotential => commands::invert_potential(&settings),
        Command::JumpThreshold => commands::jump_threshold(&settings),
    })?;

    let text = report.render(format);
    match out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    eprint!("{}", report.verdict_lines());
    Ok(report.pass())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
