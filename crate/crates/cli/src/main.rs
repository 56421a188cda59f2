use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frechet_spc::cli_io::{
    cmd_phase1, cmd_phase2, cmd_simulate, cmd_who_check, Overrides, Pollutant, RunConfig, SimulateSpec,
};
use frechet_spc::ewma::{VariabilityMode, LAMBDA_GRID};

/// Fréchet-mean monitoring of daily functional profiles.
#[derive(Parser)]
#[command(name = "frechet-spc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the in-control template and calibrate the charts.
    Phase1 {
        /// Training data (date,h00..h23).
        train: PathBuf,
        #[arg(long)]
        pollutant: Pollutant,
        /// Output directory for databank.json and limits.json.
        #[arg(long, default_value = "phase1")]
        out: PathBuf,
        /// Train only on days within the threshold rule.
        #[arg(long)]
        who_ic_only: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Monitor new days against a databank.
    Phase2 {
        /// Test data (date,h00..h23).
        test: PathBuf,
        #[arg(long)]
        pollutant: Pollutant,
        #[arg(long)]
        databank: PathBuf,
        /// Reuse limits from Phase I instead of recalibrating.
        #[arg(long)]
        limits: Option<PathBuf>,
        /// Output prefix; writes <prefix>.csv, <prefix>.jsonl, <prefix>_state.json.
        #[arg(long, default_value = "chart")]
        out: PathBuf,
        /// Run once per smoothing weight in 0.05, 0.10, 0.15, 0.20.
        #[arg(long, conflicts_with_all = ["lambda", "limits"])]
        all_lambdas: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic data file and its ground truth.
    Simulate {
        /// TOML or JSON simulation spec.
        spec: PathBuf,
        #[arg(long, default_value = "simulated.csv")]
        out: PathBuf,
        #[arg(long, default_value = "truth.json")]
        truth: PathBuf,
        /// Overrides the seed in the simulation file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apply the fixed concentration thresholds to every day.
    WhoCheck {
        data: PathBuf,
        #[arg(long)]
        pollutant: Pollutant,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML or JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    limit_level: Option<f64>,
    /// Pin the phase scale to one.
    #[arg(long)]
    fix_kappa: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// deviance or frechet_function.
    #[arg(long)]
    variability_mode: Option<VariabilityMode>,
    /// Chart the raw curve instead of its registered fit.
    #[arg(long)]
    raw_deviance: bool,
    /// Grow the parameter databank with in-control days.
    #[arg(long)]
    enrich: bool,
    #[arg(long)]
    grid_points: Option<usize>,
}

impl Common {
    fn config(&self, who_ic_only: bool) -> frechet_spc::Result<RunConfig> {
        let mut cfg = RunConfig::load_or_default(self.config.as_deref())?;
        cfg.apply(&Overrides {
            lambda: self.lambda,
            limit_level: self.limit_level,
            fix_kappa: self.fix_kappa,
            seed: self.seed,
            variability_mode: self.variability_mode,
            raw_deviance: self.raw_deviance,
            enrich: self.enrich,
            grid_points: self.grid_points,
            who_ic_only,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> frechet_spc::Result<()> {
    match cli.command {
        Command::Phase1 {
            train,
            pollutant,
            out,
            who_ic_only,
            common,
        } => {
            let cfg = common.config(who_ic_only)?;
            let s = cmd_phase1(&train, pollutant, &cfg, &out)?;
            println!("days: {} (skipped {})", s.days, s.skipped);
            println!("frechet variance: {}", s.frechet_variance);
            println!("iterations: {}", s.iterations);
            println!("converged: {}", s.converged);
            println!("deviance UCL: {}", s.deviance_ucl);
            println!("wrote {} and {}", s.databank.display(), s.limits.display());
        }
        Command::Phase2 {
            test,
            pollutant,
            databank,
            limits,
            out,
            all_lambdas,
            common,
        } => {
            let cfg = common.config(false)?;
            let runs: Vec<(RunConfig, PathBuf)> = if all_lambdas {
                LAMBDA_GRID
                    .iter()
                    .map(|&l| {
                        let mut c = cfg.clone();
                        c.ewma.lambda = l;
                        let mut p = out.as_os_str().to_owned();
                        p.push(format!("_lambda{l:.2}"));
                        (c, PathBuf::from(p))
                    })
                    .collect()
            } else {
                vec![(cfg, out)]
            };
            for (c, prefix) in runs {
                let s = cmd_phase2(&test, pollutant, &databank, limits.as_deref(), &c, &prefix)?;
                println!(
                    "lambda {}: {} days, {} chart alarms, {} parameter alarms, {} threshold flags -> {}",
                    s.lambda,
                    s.steps,
                    s.alarms,
                    s.param_alarms,
                    s.who_flags,
                    s.csv.display()
                );
            }
        }
        Command::Simulate { spec, out, truth, seed } => {
            let mut spec = SimulateSpec::load(&spec)?;
            if let Some(s) = seed {
                spec.synth.seed = s;
            }
            let n = cmd_simulate(&spec, &out, &truth)?;
            println!("wrote {n} days to {} and truth to {}", out.display(), truth.display());
        }
        Command::WhoCheck { data, pollutant, out } => {
            let (days, flagged) = match out {
                Some(path) => {
                    let counts = cmd_who_check(&data, pollutant, std::fs::File::create(&path)?)?;
                    eprintln!("wrote {}", path.display());
                    counts
                }
                None => cmd_who_check(&data, pollutant, std::io::stdout().lock())?,
            };
            eprintln!("{flagged} of {days} days exceed the threshold");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
