use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use kflow_cli::config::{ConfigFile, Overrides};
use kflow_cli::{catalog, run, scenario, CliError};

/// Flow laboratory for conformal surface metrics and their class dynamics.
#[derive(Parser)]
#[command(name = "kflow", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the curvature flow of a surface scenario.
    SurfaceFlow(RunArgs),
    /// Integrate the finite-dimensional class flow of a lattice scenario.
    ClassFlow(RunArgs),
    /// Report the stationary classes of a lattice.
    CriticalClass(RunArgs),
    /// One-shot geometric report for a surface configuration.
    Diagnostics(RunArgs),
    /// List built-in models, lattices and presets as JSON.
    Catalog {
        /// Merge extra lattices from a JSON file into the listing.
        #[arg(long)]
        lattices: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Name of a bundled preset; see `kflow catalog`.
    preset: Option<String>,
    /// TOML scenario file; mutually exclusive with a preset name.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for artifacts, created if needed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the seed of random initial data.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the integration horizon.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Suppress progress output; errors still print.
    #[arg(long)]
    quiet: bool,
}

fn load_config(args: &RunArgs) -> Result<ConfigFile, CliError> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(_), Some(_)) => {
            return Err(CliError::config("give either a preset name or --config, not both"))
        }
        (None, None) => {
            return Err(CliError::config(
                "missing scenario: give a preset name or --config <file>",
            ))
        }
        (Some(name), None) => scenario::find(name).ok_or_else(|| {
            let known: Vec<&str> =
                scenario::builtin_scenarios().iter().map(|(n, _, _)| *n).collect();
            CliError::config(format!(
                "unknown preset {name:?}; bundled presets: {}",
                known.join(", ")
            ))
        })?,
        (None, Some(path)) => ConfigFile::load(path)?,
    };
    cfg.apply(&Overrides { out: args.out.clone(), seed: args.seed, t_end: args.t_end });
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<run::RunOutcome, CliError> {
    match cli.cmd {
        Cmd::SurfaceFlow(a) => run::run_surface(&load_config(&a)?, a.quiet),
        Cmd::ClassFlow(a) => run::run_class(&load_config(&a)?, a.quiet),
        Cmd::CriticalClass(a) => run::run_critical(&load_config(&a)?, a.quiet),
        Cmd::Diagnostics(a) => run::run_diagnostics(&load_config(&a)?, a.quiet),
        Cmd::Catalog { lattices } => {
            let doc = catalog::catalog_json(lattices.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&doc).expect("catalog serializes"));
            Ok(run::RunOutcome { exit_code: 0 })
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(outcome) => outcome.exit_code,
        Err(e) => {
            eprintln!("kflow: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
