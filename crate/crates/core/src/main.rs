use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sdlp::dgp::{
    simulate_arma, simulate_dsge, simulate_govspend, simulate_late, simulate_simplified_income, simulate_stvar,
    DsgeConfig, GovSpendConfig, LateConfig, SeriesPanel, SimplifiedIncomeConfig, StateKind, StvarConfig,
};
use sdlp::estimators::{lp_iv_state, lp_state, InteractionSpec, IrfEstimator, IrfSet, IrfState};
use sdlp::experiments::{run_experiment, ExperimentConfig, EXPERIMENTS};
use sdlp::Error;

const EXIT_CRITERION: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "sdlp", version, about = "State-dependent local projection laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dgp {
    Arma,
    Dsge,
    SimplifiedIncome,
    Govspend,
    Late,
    Stvar,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one panel and write it as CSV.
    Simulate {
        dgp: Dgp,
        /// JSON file with the simulator's parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        len: usize,
        /// ARMA autoregressive coefficient.
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// ARMA moving-average coefficient.
        #[arg(long, default_value_t = 0.2)]
        gamma: f64,
    },
    /// Run a state-dependent LP (or LP-IV) on a panel CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Interaction spec as JSON, e.g. '{"kind":"binary","threshold":0.5}'.
        #[arg(long, default_value = r#"{"kind":"binary","threshold":0.5}"#)]
        spec: String,
        #[arg(long, default_value_t = 10)]
        horizons: usize,
        /// Use the panel's instrument column.
        #[arg(long)]
        iv: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a named Monte Carlo experiment.
    Experiment {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(config: &Option<PathBuf>) -> Result<T, Failure> {
    match config {
        None => Ok(T::default()),
        Some(path) => serde_json::from_str(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
    }
}

fn simulate(dgp: Dgp, config: &Option<PathBuf>, seed: u64, len: usize, rho: f64, gamma: f64) -> Result<SeriesPanel, Failure> {
    let panel = match dgp {
        Dgp::Arma => simulate_arma(rho, gamma, len, seed)?,
        Dgp::Dsge => simulate_dsge(&parse_json::<DsgeConfig>(config)?, len, seed)?,
        Dgp::SimplifiedIncome => simulate_simplified_income(&parse_json::<SimplifiedIncomeConfig>(config)?, len, seed)?,
        Dgp::Govspend => simulate_govspend(&parse_json::<GovSpendConfig>(config)?, len, seed)?,
        Dgp::Late => simulate_late(&parse_json::<LateConfig>(config)?, len, seed)?,
        Dgp::Stvar => simulate_stvar(&parse_json::<StvarConfig>(config)?, len, seed)?,
    };
    Ok(panel)
}

fn estimate(input: &Path, spec: &str, horizons: usize, iv: bool, out: &Path) -> Result<(), Failure> {
    let panel = SeriesPanel::from_csv(&read(input)?)?;
    let spec: InteractionSpec = serde_json::from_str(spec).map_err(|e| Failure::Usage(format!("spec: {e}")))?;
    let fits = if iv { lp_iv_state(&panel, &spec, horizons)? } else { lp_state(&panel, &spec, horizons)? };
    let mut coefficients = String::from("h,index,value\n");
    for fit in &fits {
        for (i, b) in fit.coefficients.iter().enumerate() {
            coefficients.push_str(&format!("{},{i},{b:.16e}\n", fit.horizon));
        }
    }
    write(out, "coefficients.csv", &coefficients)?;
    if panel.state_kind == StateKind::Binary && !spec.is_kernel() {
        let mut irf = IrfSet::new();
        for s in 0..2 {
            let path: Vec<f64> = fits.iter().map(|f| f.evaluate_at_state(s as f64)).collect();
            irf.insert_path(IrfState::State(s), IrfEstimator::Lp, &path);
        }
        write(out, "irf.csv", &irf.to_csv())?;
    }
    Ok(())
}

fn experiment(
    name: &str,
    config: &Option<PathBuf>,
    seed: Option<u64>,
    out: &Option<PathBuf>,
    workers: Option<usize>,
) -> Result<bool, Failure> {
    if !EXPERIMENTS.contains(&name) {
        return Err(Failure::Usage(format!("unknown experiment {name:?}; expected one of {}", EXPERIMENTS.join(", "))));
    }
    let mut cfg = match config {
        Some(path) => ExperimentConfig::from_json(&read(path)?)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = name.to_string();
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    if out.is_some() {
        cfg.output_dir = out.clone();
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(name));
    let output = run_experiment(&cfg)?;
    for (file, contents) in &output.files {
        write(&dir, file, contents)?;
    }
    let summary = &output.summary;
    for (metric, m) in &summary.metrics {
        if let Some(pass) = m.pass {
            println!("{} {metric}: {:.6e} (mc_se {:.2e}; {})", if pass { "PASS" } else { "FAIL" }, m.value, m.mc_se, m.criterion);
        }
    }
    Ok(summary.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { dgp, config, seed, out, len, rho, gamma } => simulate(*dgp, config, *seed, *len, *rho, *gamma)
            .and_then(|panel| write(out, "panel.csv", &panel.to_csv()))
            .map(|_| true),
        Command::Estimate { input, spec, horizons, iv, out } => estimate(input, spec, *horizons, *iv, out).map(|_| true),
        Command::Experiment { name, config, seed, out, workers } => experiment(name, config, *seed, out, *workers),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CRITERION),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CRITERION)
        }
    }
}
