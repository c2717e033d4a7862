use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use allospec::bounds::{bound_report, BoundInputs, Constants, RegimeThresholds};
use allospec::experiments::{parse_json, parse_with_overrides, Experiment, ExperimentConfig};
use allospec::format::{to_json, write_atomic};
use allospec::model::{
    build_model, validate_model, AllometricModel, ModelFile, ModelSpec, TOL_ALIGN_CONSTRUCTED, TOL_ALIGN_FILE,
};
use allospec::{Error, Result};

/// Spectral clustering of allometric-extension mixtures: model tools, bound
/// evaluation and Monte Carlo experiments.
#[derive(Parser)]
#[command(name = "allospec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model from a model spec and print it as JSON
    BuildModel(ModelArgs),
    /// Check every model invariant and print the report
    ValidateModel(ValidateArgs),
    /// Evaluate every closed-form bound for a model
    Bounds(BoundsArgs),
    /// Misclassification simulation over the configured grid
    Simulate(ExperimentArgs),
    /// Exact-recovery sweep over the configured grid
    SweepRecovery(ExperimentArgs),
    /// Operator-norm concentration quantiles
    Opnorm(ExperimentArgs),
    /// Exponential-moment check of one-dimensional projections
    Subgaussian(ExperimentArgs),
    /// Per-replication eigenvector perturbation check
    DavisKahan(ExperimentArgs),
    /// Calibrate the absolute constants and print them as JSON
    Calibrate(ExperimentArgs),
}

#[derive(Args)]
struct Common {
    /// Input JSON file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override a config entry, e.g. `--set reps=10` or `--set model_spec.n=5`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file. Model and bound commands print to stdout without it;
    /// experiments fall back to the config's `output_path`
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Alignment tolerance; defaults to 1e-6 for model files and 1e-10 for specs
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Dimension used in the bounds; defaults to the model's
    #[arg(long)]
    n: Option<usize>,
    /// Sample size; required for the sample-size condition and related fields
    #[arg(long)]
    m: Option<usize>,
    /// Deviation parameter of the concentration bound; defaults to n
    #[arg(long)]
    u: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// JSON file with constants (keys C, c, K, K_g), e.g. from `calibrate`
    #[arg(long, value_name = "PATH")]
    constants: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); never changes results
    #[arg(long, env = "ALLOSPEC_WORKERS")]
    workers: Option<usize>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

enum ModelInput {
    Spec(ModelSpec),
    File(ModelFile),
}

/// Model input is either a spec (spectra plus `μ`) or an explicit model file
/// (with `sigma1`/`sigma2`); the two are told apart by their keys.
fn load_model_input(c: &Common) -> Result<ModelInput> {
    let text = read(&c.config)?;
    let doc: Value = parse_json(&c.config, &text)?;
    if doc.get("sigma1").is_some() {
        Ok(ModelInput::File(parse_with_overrides(&c.config, &text, &c.overrides)?))
    } else {
        Ok(ModelInput::Spec(parse_with_overrides(&c.config, &text, &c.overrides)?))
    }
}

fn load_model(c: &Common) -> Result<AllometricModel> {
    match load_model_input(c)? {
        ModelInput::Spec(s) => build_model(&s),
        ModelInput::File(f) => {
            let m = f.into_model()?;
            validate_model(&m, TOL_ALIGN_FILE)?.into_result()?;
            Ok(m)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildModel(a) => {
            let spec = match load_model_input(&a.common)? {
                ModelInput::Spec(s) => s,
                ModelInput::File(_) => {
                    return Err(Error::Config {
                        field: "config".into(),
                        message: "expected a model spec (n, mu_norm, eigvals1, ...), got a model file".into(),
                    })
                }
            };
            emit(a.common.output.as_deref(), &build_model(&spec)?.to_json()?)
        }
        Command::ValidateModel(a) => {
            let (model, default_tol) = match load_model_input(&a.common)? {
                ModelInput::Spec(s) => (build_model(&s)?, TOL_ALIGN_CONSTRUCTED),
                ModelInput::File(f) => (f.into_model()?, TOL_ALIGN_FILE),
            };
            let report = validate_model(&model, a.tol.unwrap_or(default_tol))?;
            emit(a.common.output.as_deref(), &to_json(&report)?)?;
            report.into_result().map(|_| ())
        }
        Command::Bounds(a) => {
            let model = load_model(&a.common)?;
            let constants = match &a.constants {
                Some(p) => parse_json::<Constants>(p, &read(p)?)?,
                None => Constants::default(),
            };
            let n = a.n.unwrap_or(model.n()) as f64;
            let inputs = BoundInputs {
                alpha: a.alpha,
                epsilon: a.epsilon,
                n,
                m: a.m.map(|m| m as f64),
                u: a.u.unwrap_or(n),
            };
            let report = bound_report(&model, inputs, &constants, RegimeThresholds::default())?;
            emit(a.common.output.as_deref(), &to_json(&report)?)
        }
        Command::Simulate(a) => experiment(Experiment::Misclassification, a),
        Command::SweepRecovery(a) => experiment(Experiment::Recovery, a),
        Command::Opnorm(a) => experiment(Experiment::OpNorm, a),
        Command::Subgaussian(a) => experiment(Experiment::Subgaussian, a),
        Command::DavisKahan(a) => experiment(Experiment::DavisKahan, a),
        Command::Calibrate(a) => experiment(Experiment::Calibrate, a),
    }
}

fn experiment(kind: Experiment, a: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.common.config, &a.common.overrides)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    let output = a
        .common
        .output
        .clone()
        .or_else(|| cfg.output_path.clone())
        .ok_or_else(|| Error::Config {
            field: "output_path".into(),
            message: "no output path given (use --output or set output_path)".into(),
        })?;
    if let Some(text) = kind.run_to(&cfg, &output)? {
        print!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
