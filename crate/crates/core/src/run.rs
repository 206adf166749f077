//! Batch execution behind the CLI: load and validate a config, run the
//! requested pipeline, emit CSV/JSON artifacts.
//!
//! Exit codes: 1 config/schema problems (message names the field), 2 failed
//! hypothesis validation (message names the hypothesis), 3 numerical/runtime
//! failures.

use crate::coefficients::derive_constants;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fbm::{sample_fbm_paths, HurstParameter};
use crate::report::{
    write_ensemble_csv, write_json, write_moment_csv, DecayFitReport, RunHeader,
};
use crate::selftest;
use crate::spectral::smoothing_constant;
use crate::stability::{contraction_constant, fit_decay_rate, DecayCertificate, SemigroupBounds};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Certify,
    GenNoise,
    SelfTest,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// 0 = library default thread pool; 1 guarantees serial execution.
    pub threads: usize,
}

#[derive(Debug)]
pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::Hypothesis { .. } => 2,
        _ => 3,
    }
}

fn fail(e: Error) -> CliFailure {
    CliFailure {
        code: exit_code(&e),
        message: e.to_string(),
    }
}

#[derive(Serialize)]
struct CertificateReport {
    #[serde(flatten)]
    header: RunHeader,
    #[serde(flatten)]
    certificate: DecayCertificate,
    /// min(2 lambda_choice, 2 gamma_sigma) when the diffusion is active;
    /// heuristic from the proof structure, not a proven rate.
    predicted_rate_cap: f64,
    predicted_rate_cap_note: String,
    /// The proof requires decay rates a strictly inside (0, lambda).
    admissible_rate_interval: (f64, f64),
    /// The analysis treats gamma < lambda and gamma > lambda only.
    sigma_decay_equals_lambda_untreated: bool,
}

struct LoadedConfig {
    config: ExperimentConfig,
    hash: String,
    seed: u64,
    out_dir: PathBuf,
}

fn load(opts: &RunOptions) -> Result<LoadedConfig> {
    let path = opts
        .config
        .as_ref()
        .ok_or_else(|| Error::config("missing required --config <file>"))?;
    let bytes = fs::read(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::config(format!("config is not valid UTF-8: {e}")))?;
    let config = ExperimentConfig::from_json(&text)?;
    let seed = opts.seed.unwrap_or(config.monte_carlo.seed);
    let out_dir = opts
        .out
        .clone()
        .or_else(|| config.outputs.as_ref().map(|o| PathBuf::from(&o.directory)))
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig {
        config,
        hash,
        seed,
        out_dir,
    })
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = fs::File::create(&path)?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run_simulate(loaded: &LoadedConfig) -> Result<()> {
    let exp = loaded.config.build()?;
    let table = exp.monte_carlo_moments(loaded.config.monte_carlo.n_paths, loaded.seed)?;
    let header = RunHeader::new(loaded.hash.clone(), loaded.seed);
    write_file(&loaded.out_dir, "moments.csv", |w| {
        write_moment_csv(w, &table, &header)
    })?;
    let (fit, fit_error) = match fit_decay_rate(&table) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = DecayFitReport {
        header,
        fit,
        fit_error,
    };
    write_file(&loaded.out_dir, "decay_fit.json", |w| write_json(w, &report))
}

fn run_certify(loaded: &LoadedConfig) -> Result<()> {
    let exp = loaded.config.build()?;
    let constants = derive_constants(&exp.set, &exp.model, &exp.marks)?;
    let lambda = exp.model.mu_min();
    // Strict gap keeps the smoothing supremum finite.
    let lambda_choice = lambda * (1.0 - 1e-6);
    let m_one_minus_beta = smoothing_constant(&exp.model, constants.beta, lambda_choice)?;
    let certificate = contraction_constant(
        &constants,
        &SemigroupBounds {
            m: 1.0,
            lambda,
            m_one_minus_beta,
        },
    )?;
    let predicted_rate_cap = if exp.set.sigma0 > 0.0 {
        (2.0 * lambda_choice).min(2.0 * constants.gamma_sigma)
    } else {
        2.0 * lambda_choice
    };
    let report = CertificateReport {
        header: RunHeader::new(loaded.hash.clone(), loaded.seed),
        certificate,
        predicted_rate_cap,
        predicted_rate_cap_note: "heuristic from proof structure".to_string(),
        admissible_rate_interval: (0.0, lambda),
        sigma_decay_equals_lambda_untreated: exp.set.sigma0 > 0.0
            && constants.gamma_sigma == lambda,
    };
    write_file(&loaded.out_dir, "certificate.json", |w| write_json(w, &report))
}

fn run_gen_noise(loaded: &LoadedConfig) -> Result<()> {
    let exp = loaded.config.build()?;
    let hurst = HurstParameter::new(loaded.config.model.hurst)?;
    let paths = sample_fbm_paths(
        *exp.cfg.grid(),
        hurst,
        loaded.config.monte_carlo.n_paths,
        loaded.seed,
    )?;
    let header = RunHeader::new(loaded.hash.clone(), loaded.seed);
    write_file(&loaded.out_dir, "ensemble.csv", |w| {
        write_ensemble_csv(w, &paths, &header)
    })
}

fn dispatch(cmd: Command, opts: &RunOptions) -> Result<()> {
    match cmd {
        Command::SelfTest => {
            let mut out = std::io::stdout();
            let ok = selftest::run_all(&mut out)?;
            if ok {
                Ok(())
            } else {
                Err(Error::numerical("self-test failed"))
            }
        }
        Command::Simulate => run_simulate(&load(opts)?),
        Command::Certify => run_certify(&load(opts)?),
        Command::GenNoise => run_gen_noise(&load(opts)?),
    }
}

/// Runs one subcommand; `--threads 1` guarantees serial, bitwise-reproducible
/// execution (block-ordered reduction keeps other counts identical too).
pub fn run(cmd: Command, opts: &RunOptions) -> std::result::Result<(), CliFailure> {
    let body = || dispatch(cmd, opts).map_err(fail);
    if opts.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| CliFailure {
                code: 3,
                message: format!("thread pool: {e}"),
            })?;
        pool.install(body)
    } else {
        body()
    }
}
