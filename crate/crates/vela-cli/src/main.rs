//! `vela` — periodic-box viscoelastic simulator and verification harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vela_cli::config::{ModelChoice, RunConfig};
use vela_cli::run;

#[derive(Parser)]
#[command(
    name = "vela",
    about = "Pseudo-spectral simulator for incompressible viscoelastic dynamics \
             with energy, decay, and inequality diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flag overrides applied on top of the config file (or the defaults).
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Grid points per axis (power of two, >= 8).
    #[arg(long)]
    n: Option<usize>,
    /// Box half-length.
    #[arg(long)]
    l: Option<f64>,
    /// Pressure-wave speed c1.
    #[arg(long)]
    c1: Option<f64>,
    /// Viscosity nu.
    #[arg(long)]
    nu: Option<f64>,
    /// Constitutive closure: builtin | oldroyd-b.
    #[arg(long)]
    model: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Initial-data amplitude in [0, 0.05].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Step size (default: CFL bound).
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon (default: box cap).
    #[arg(long)]
    t_end: Option<f64>,
    /// Output cadence in steps.
    #[arg(long)]
    output_every: Option<usize>,
    /// Drop the nonlinear terms.
    #[arg(long)]
    linear: bool,
    /// Output directory.
    #[arg(long)]
    dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), String> {
        if let Some(n) = self.n {
            cfg.grid.n = n;
        }
        if let Some(l) = self.l {
            cfg.grid.l = l;
        }
        if let Some(c1) = self.c1 {
            cfg.material.c1 = c1;
        }
        if let Some(nu) = self.nu {
            cfg.material.nu = nu;
        }
        if let Some(model) = &self.model {
            cfg.material.model = match model.as_str() {
                "builtin" => ModelChoice::Builtin,
                "oldroyd-b" => ModelChoice::OldroydB,
                other => return Err(format!("unknown model '{other}' (builtin | oldroyd-b)")),
            };
        }
        if let Some(seed) = self.seed {
            cfg.data.seed = seed;
        }
        if let Some(epsilon) = self.epsilon {
            cfg.data.epsilon = epsilon;
        }
        if let Some(dt) = self.dt {
            cfg.solver.dt = Some(dt);
        }
        if let Some(t_end) = self.t_end {
            cfg.solver.t_end = Some(t_end);
        }
        if let Some(every) = self.output_every {
            cfg.solver.output_every = every;
        }
        if self.linear {
            cfg.solver.linear = true;
        }
        if let Some(dir) = &self.dir {
            cfg.output.dir = dir.clone();
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write CSV diagnostics, snapshots, and a summary.
    Simulate {
        /// TOML config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the same configuration across several viscosities and grade the
    /// uniform energy-growth constant.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated viscosities, e.g. --nu-list 0,1e-3,1e-2.
        #[arg(long = "nu-list", value_delimiter = ',', required = true)]
        nu_list: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Verify the shear-wave null condition for the configured model, the
    /// Oldroyd-B closure, and the planted-violation fixture.
    Nullcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the Hardy and weighted Sobolev inequality batteries.
    Inequalities {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Describe a binary snapshot file.
    Inspect {
        snapshot: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>, overrides: &Overrides) -> Result<RunConfig, String> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_path(p).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<bool, String> {
    match &cli.command {
        Command::Simulate { config, overrides } => {
            let cfg = load_config(config, overrides)?;
            let artifacts = run::run_simulation(&cfg).map_err(|e| e.to_string())?;
            print!("{}", artifacts.summary);
            println!("wrote {}", artifacts.csv_path.display());
            Ok(true)
        }
        Command::Sweep { config, nu_list, overrides } => {
            let cfg = load_config(config, overrides)?;
            let report = run::run_sweep(&cfg, nu_list).map_err(|e| e.to_string())?;
            print!("{}", report.summary);
            println!("wrote {}", report.report_path.display());
            Ok(report.pass)
        }
        Command::Nullcheck { config, overrides } => {
            let cfg = load_config(config, overrides)?;
            let outcome = run::run_nullcheck(&cfg).map_err(|e| e.to_string())?;
            print!("{}", outcome.summary);
            Ok(outcome.pass)
        }
        Command::Inequalities { config, overrides } => {
            let cfg = load_config(config, overrides)?;
            let outcome = run::run_inequalities(&cfg).map_err(|e| e.to_string())?;
            print!("{}", outcome.summary);
            Ok(outcome.pass)
        }
        Command::Inspect { snapshot } => {
            print!("{}", run::inspect_snapshot(snapshot).map_err(|e| e.to_string())?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
