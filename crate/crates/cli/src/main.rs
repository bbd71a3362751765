use std::path::PathBuf;
use std::process::ExitCode;

use bloch_cli::config::ExperimentConfig;
use bloch_cli::error::exit;
use bloch_cli::output::num;
use bloch_cli::{run_experiment, sweep, CliError, OUTPUT_DIR_ENV};
use bloch_core::models::BUILTIN_MODELS;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bloch", version, about = "Adiabatic-frame Bloch wave-operator experiments")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv, summary.csv and summary.json.
    Run(ConfigArgs),
    /// Run the [sweep] gammas concurrently and fit the scaling slope.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Concurrent runs (overrides sweep.workers).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse and validate a config, then print it with defaults filled in.
    Validate(ConfigArgs),
    /// List the built-in models.
    Models,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment config.
    config: PathBuf,

    /// Override any config key, e.g. `--set model.gamma=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,

    #[arg(long)]
    gamma: Option<f64>,

    #[arg(long)]
    t0: Option<f64>,

    #[arg(long)]
    t_final: Option<f64>,

    #[arg(long)]
    checkpoints: Option<usize>,

    #[arg(long)]
    tol: Option<f64>,

    /// identity, stationary or custom.
    #[arg(long)]
    ic: Option<String>,

    /// riccati, closed_form, radon or all.
    #[arg(long)]
    route: Option<String>,

    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        let mut push = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{key}={v}"));
            }
        };
        push("model.gamma", self.gamma.map(|v| format!("{v:?}")));
        push("time.t0", self.t0.map(|v| format!("{v:?}")));
        push("time.t_final", self.t_final.map(|v| format!("{v:?}")));
        push("time.checkpoints", self.checkpoints.map(|v| v.to_string()));
        push("solver.tol", self.tol.map(|v| format!("{v:?}")));
        push("solver.ic", self.ic.as_ref().map(|v| format!("{v:?}")));
        push("solver.route", self.route.as_ref().map(|v| format!("{v:?}")));
        push("seed", self.seed.map(|v| v.to_string()));
        push(
            "output.dir",
            self.output_dir.as_ref().map(|p| format!("{:?}", p.display().to_string())),
        );
        o
    }

    fn load(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::load(&self.config, &self.overrides())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Models => {
            for (name, about) in BUILTIN_MODELS {
                println!("{name:<14} {about}");
            }
            Ok(exit::OK)
        }
        Command::Validate(args) => {
            let config = args.load()?;
            print!("{}", config.to_toml());
            Ok(exit::OK)
        }
        Command::Run(args) => {
            let config = args.load()?;
            let run = run_experiment(&config)?;
            let s = run.summary();
            let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "-".into());
            println!("status             {}", s.status.name());
            if let Some(e) = &s.error {
                println!("error              {e}");
            }
            println!("sup |U - 1|_2      {}", opt(s.delta_spectral));
            println!("sup |U - 1|_F      {}", opt(s.delta_frobenius));
            println!("max leakage        {}", opt(s.max_leakage_spectral));
            println!("bound 2d/(1-d)     {}", opt(s.bound_distance));
            println!("bounds hold        {}", s.bounds_hold.map_or("-".into(), |b| b.to_string()));
            println!("output             {}", run.dir.display());
            Ok(run.exit_code())
        }
        Command::Sweep { config, workers } => {
            let mut overrides = config.overrides();
            if let Some(w) = workers {
                overrides.push(format!("sweep.workers={w}"));
            }
            let config = ExperimentConfig::load(&config.config, &overrides)?;
            let result = sweep(&config)?;
            for p in &result.points {
                println!(
                    "gamma {:<8} {:<11} {:<15} sup |U - 1|_F {}",
                    p.gamma,
                    p.ic.name(),
                    p.summary.status.name(),
                    p.summary.delta_frobenius.map(num).unwrap_or_else(|| "-".into())
                );
            }
            for f in &result.fits {
                match f.slope {
                    Some(s) => println!("slope {:<11} {:<9} {s:.4}", f.ic.name(), f.norm),
                    None => println!(
                        "slope {:<11} {:<9} n/a ({} usable points, need 3)",
                        f.ic.name(),
                        f.norm,
                        f.points
                    ),
                }
            }
            println!("output {}", result.dir.display());
            Ok(result.exit_code())
        }
    }
}
