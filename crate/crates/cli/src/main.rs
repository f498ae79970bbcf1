use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use visco_cli::config::RunConfig;
use visco_cli::{commands, presets, CliError, CliResult};

#[derive(Parser)]
#[command(name = "visco", version, about = "Pseudo-spectral viscoelastic flow simulator and verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, env = "VISCO_CONFIG", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in configuration (see `visco presets`).
    #[arg(long, global = true, env = "VISCO_PRESET")]
    preset: Option<String>,

    /// Artifact directory.
    #[arg(long, global = true, env = "VISCO_OUT", default_value = "out")]
    out: PathBuf,

    /// Overrides the data-recipe seed.
    #[arg(long, global = true, env = "VISCO_SEED")]
    seed: Option<u64>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "VISCO_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Decay rates of the linearised flow by Fourier quadrature.
    LinearDecay,
    /// Nonlinear run with snapshots and an energy monitor.
    Simulate,
    /// Structural invariants and Lyapunov functional along a trajectory.
    Invariants {
        /// Existing trajectory (a `simulate` output directory or its
        /// `snapshots/`); a fresh run is made when omitted.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Relative-energy comparison of two runs.
    WeakStrong,
    /// Tabulates the per-mode Green's matrix.
    GreensDump,
    /// Lists the built-in presets.
    Presets,
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => {
            let text = presets::get(name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
            RunConfig::parse(text)?
        }
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.recipe.seed = seed;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Command::Presets = cli.command {
        for (name, _) in presets::ALL {
            println!("{name}");
        }
        return Ok(());
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::LinearDecay => commands::linear_decay(&cfg, &cli.out),
        Command::Simulate => commands::simulate(&cfg, &cli.out),
        Command::Invariants { trajectory } => commands::invariants(&cfg, &cli.out, trajectory.as_deref()),
        Command::WeakStrong => commands::weak_strong(&cfg, &cli.out),
        Command::GreensDump => commands::greens_dump(&cfg, &cli.out),
        Command::Presets => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("visco: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
