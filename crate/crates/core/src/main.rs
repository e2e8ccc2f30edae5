use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emos::config::RunConfig;
use emos::data::load_coefficients;
use emos::pipeline::{run_fit, run_predict, run_verify, Inputs};
use emos::synth::scenario::{generate_scenario, write_scenario, ScenarioSpec};
use emos::Error;

/// Censored-GEV EMOS post-processing for ensemble precipitation forecasts.
#[derive(Parser)]
#[command(name = "emos", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the coefficient time series.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Issue predictive distributions from fitted coefficients.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// Coefficient series written by `fit` [default: <out-dir>/coefficients.csv]
        #[arg(long)]
        coefficients: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score predictions against observations and the raw ensemble.
    Verify {
        #[command(flatten)]
        data: DataArgs,
        /// Predictions written by `predict` [default: <out-dir>/predictions.csv]
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Use these predictions instead of the raw ensemble as reference.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate a synthetic scenario with known coefficients.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding forecasts.csv, observations.csv, stations.csv and grid.csv.
    #[arg(long, default_value = ".")]
    data_dir: PathBuf,
    #[arg(long)]
    forecasts: Option<PathBuf>,
    #[arg(long)]
    observations: Option<PathBuf>,
    #[arg(long)]
    stations: Option<PathBuf>,
    #[arg(long)]
    grid: Option<PathBuf>,
}

impl DataArgs {
    fn inputs(&self) -> Inputs {
        let defaults = Inputs::in_dir(&self.data_dir);
        Inputs {
            forecasts: self.forecasts.clone().unwrap_or(defaults.forecasts),
            stations: self.stations.clone().unwrap_or(defaults.stations),
            grid: self.grid.clone().unwrap_or(defaults.grid),
        }
    }

    fn observations(&self) -> PathBuf {
        self.observations
            .clone()
            .unwrap_or_else(|| self.data_dir.join("observations.csv"))
    }
}

#[derive(Args)]
struct RunArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Neighborhood radius in km; 0 selects the local model.
    #[arg(long)]
    radius_km: Option<f64>,
    /// Standardize by the grid's climatology factors before smoothing.
    #[arg(long)]
    climo: bool,
    #[arg(long)]
    window_days: Option<usize>,
    /// Comma-separated exceedance thresholds in mm.
    #[arg(long)]
    thresholds: Option<String>,
    /// Bootstrap seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        if let Some(r) = self.radius_km {
            c.neighborhood_radius_km = r;
        }
        if self.climo {
            c.use_climo = true;
        }
        if let Some(n) = self.window_days {
            c.window_days = n;
        }
        if let Some(t) = &self.thresholds {
            c.set("thresholds", t)?;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 60)]
    days: usize,
    #[arg(long, default_value_t = 100)]
    sites: usize,
    #[arg(long, default_value_t = 20)]
    members: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Coefficient file whose first row is the true local-model coefficients.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// RMS displacement of the forecast fields in km.
    #[arg(long, default_value_t = 0.0)]
    displacement_km: f64,
    /// Multiplier on the true scale coefficients.
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, default_value = "synthetic")]
    out_dir: PathBuf,
}

fn simulate(a: &SimulateArgs) -> Result<(), Error> {
    let mut spec = ScenarioSpec::new(a.days, a.sites, a.members, a.seed);
    if let Some(path) = &a.truth {
        let first = load_coefficients(path)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::Config(format!("{} has no coefficient rows", path.display())))?;
        spec.truth = first.coefficients.with_day(spec.start_date);
    }
    spec.displacement_km = a.displacement_km;
    spec.noise_scale = a.noise_scale;
    let scenario = generate_scenario(&spec)?;
    write_scenario(&scenario, &a.out_dir)?;
    log::info!("wrote scenario to {}", a.out_dir.display());
    Ok(())
}

fn or_default(path: &Option<PathBuf>, out_dir: &Path, name: &str) -> PathBuf {
    path.clone().unwrap_or_else(|| out_dir.join(name))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fit { data, run } => {
            let path = run_fit(&data.inputs(), &data.observations(), &run.config()?, &run.out_dir)?;
            log::info!("wrote {}", path.display());
        }
        Command::Predict { data, coefficients, run } => {
            let coefficients = or_default(&coefficients, &run.out_dir, "coefficients.csv");
            let path = run_predict(&data.inputs(), &coefficients, &run.config()?, &run.out_dir)?;
            log::info!("wrote {}", path.display());
        }
        Command::Verify {
            data,
            predictions,
            reference,
            run,
        } => {
            let predictions = or_default(&predictions, &run.out_dir, "predictions.csv");
            let written = run_verify(
                &data.inputs(),
                &data.observations(),
                &predictions,
                reference.as_deref(),
                &run.config()?,
                &run.out_dir,
            )?;
            for p in written {
                log::info!("wrote {}", p.display());
            }
        }
        Command::Simulate(args) => simulate(&args)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
