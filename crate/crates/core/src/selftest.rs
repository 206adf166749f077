//! Built-in verification suite behind the `self-test` subcommand: property
//! sweeps for the scalar-product bounds, the Gamma identity, the Wiener
//! isometry and the semigroup laws, plus the oracle scenarios embedded in the
//! shipped presets.

use crate::config::{ExperimentConfig, OracleSection};
use crate::error::{Error, Result};
use crate::fbm::{self, FbmSampler, HurstParameter};
use crate::grid::{StepFunction, TimeGrid};
use crate::rng::{substream, StreamDomain};
use crate::spectral::{
    fractional_power_apply, qfbm_moment_bound_check, semigroup_apply, DiagonalSchedule,
    QCovariance, SpectralModel,
};
use crate::stability::{fit_decay_rate, gamma_identity_check};
use rand::Rng;
use std::io::Write;

pub const PRESET_SEMIGROUP_ONLY: &str = include_str!("../../../presets/semigroup_only.json");
pub const PRESET_FROZEN_DRIFT: &str = include_str!("../../../presets/frozen_drift.json");
pub const PRESET_FRACTIONAL_OU: &str = include_str!("../../../presets/fractional_ou.json");
pub const PRESET_JUMP_ONLY: &str = include_str!("../../../presets/jump_only.json");

pub fn embedded_presets() -> [(&'static str, &'static str); 4] {
    [
        ("semigroup_only", PRESET_SEMIGROUP_ONLY),
        ("frozen_drift", PRESET_FROZEN_DRIFT),
        ("fractional_ou", PRESET_FRACTIONAL_OU),
        ("jump_only", PRESET_JUMP_ONLY),
    ]
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, outcome: Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult {
            name: name.to_string(),
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name: name.to_string(),
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn rkhs_l2_bound_sweep() -> Result<(bool, String)> {
    let mut rng = substream(1001, StreamDomain::Marks, 0, 0);
    let mut worst = f64::MIN;
    for _ in 0..50 {
        let n = rng.random_range(1..32usize);
        let grid = TimeGrid::new(1.0 / n as f64, n)?;
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let psi = StepFunction::new(grid, values)?;
        let hurst = HurstParameter::new(0.55 + 0.4 * rng.random::<f64>())?;
        let chk = fbm::l2_bound_check(&psi, hurst)?;
        if !chk.holds {
            return Ok((false, format!("violated: lhs {} rhs {}", chk.lhs, chk.rhs)));
        }
        if chk.rhs > 0.0 {
            worst = worst.max(chk.lhs / chk.rhs);
        }
    }
    Ok((true, format!("50 random step functions, worst lhs/rhs = {worst:.4}")))
}

fn gamma_identity_grid() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for ai in 1..=9 {
        let alpha = ai as f64 / 10.0;
        for c in [0.5, 1.0, 2.0, 10.0] {
            let chk = gamma_identity_check(alpha, c)?;
            worst = worst.max(chk.rel_err);
        }
    }
    Ok((worst <= 1e-8, format!("worst relative error {worst:.3e}")))
}

fn scalar_isometry_mc() -> Result<(bool, String)> {
    let grid = TimeGrid::new(1.0 / 256.0, 256)?;
    let hurst = HurstParameter::new(0.7)?;
    let psi = StepFunction::indicator(grid, 0.5);
    let expect = fbm::rkhs_scalar_product(&psi, &psi, hurst)?;
    let sampler = FbmSampler::new(grid, hurst)?;
    let n = 4000u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in 0..n {
        let path = sampler.sample_path(1002, p);
        let v = fbm::wiener_integral(&psi, &path)?;
        sum += v * v;
        sum_sq += v * v * v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let se = (var / nf).sqrt();
    let ok = (mean - expect).abs() <= 5.0 * se;
    Ok((
        ok,
        format!("E[(int psi dB)^2] = {mean:.5} vs <psi,psi> = {expect:.5} (se {se:.2e})"),
    ))
}

fn qfbm_bound_mc() -> Result<(bool, String)> {
    let model = SpectralModel::new(vec![1.0, 2.0])?;
    let q = QCovariance::new(vec![0.7, 0.3])?;
    let grid = TimeGrid::new(1.0 / 64.0, 64)?;
    let hurst = HurstParameter::new(0.8)?;
    let mut rng = substream(1003, StreamDomain::Marks, 0, 0);
    let per_mode: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..64).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let schedule = DiagonalSchedule { grid, per_mode };
    let chk = qfbm_moment_bound_check(&model, &q, &schedule, hurst, 3000, 1004)?;
    Ok((
        chk.holds,
        format!("lhs {:.5} <= rhs {:.5} (se {:.2e})", chk.lhs, chk.rhs, chk.std_err),
    ))
}

fn semigroup_laws() -> Result<(bool, String)> {
    let model = SpectralModel::new(vec![1.0, 2.0, 4.0])?;
    let v = vec![0.7, -1.1, 0.4];
    let mut worst = 0.0f64;
    // S(0) = I.
    for (a, b) in semigroup_apply(&model, 0.0, &v)?.iter().zip(v.iter()) {
        worst = worst.max((a - b).abs());
    }
    // S(t) S(s) = S(t+s).
    for (t, s) in [(0.3, 0.9), (1.5, 0.1)] {
        let lhs = semigroup_apply(&model, t, &semigroup_apply(&model, s, &v)?)?;
        let rhs = semigroup_apply(&model, t + s, &v)?;
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    // (-A)^alpha (-A)^{-alpha} = I.
    for alpha in [0.25, 0.5, 0.9] {
        let w = fractional_power_apply(
            &model,
            -alpha,
            &fractional_power_apply(&model, alpha, &v)?,
        )?;
        for (a, b) in w.iter().zip(v.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst <= 1e-12, format!("worst identity violation {worst:.3e}")))
}

/// Runs the oracle embedded in a preset config against a fresh simulation.
pub fn run_preset_oracle(name: &str, json: &str) -> CheckResult {
    let outcome = (|| -> Result<(bool, String)> {
        let cfg = ExperimentConfig::from_json(json)?;
        let oracle = cfg
            .oracle
            .clone()
            .ok_or_else(|| Error::config(format!("preset {name} has no oracle section")))?;
        let exp = cfg.build()?;
        let table = exp.monte_carlo_moments(cfg.monte_carlo.n_paths, cfg.monte_carlo.seed)?;
        let node_at = |time: f64| -> Result<usize> {
            table
                .times
                .iter()
                .position(|t| (t - time).abs() <= 1e-9)
                .ok_or_else(|| Error::domain(format!("probe time {time} is not a grid node")))
        };
        match oracle {
            OracleSection::DecayRate { expected, rel_tol } => {
                let fit = fit_decay_rate(&table)?;
                let ok = (fit.a_hat - expected).abs() <= rel_tol * expected.abs();
                Ok((ok, format!("a_hat {} vs {expected} (rel_tol {rel_tol})", fit.a_hat)))
            }
            OracleSection::TerminalMeanSq { time, expected, rel_tol } => {
                let j = node_at(time)?;
                let got = table.mean_sq[j];
                let ok = (got - expected).abs() <= rel_tol * expected.abs();
                Ok((ok, format!("m({time}) = {got} vs {expected} (rel_tol {rel_tol})")))
            }
            OracleSection::MomentVsConstant { time, expected, se_multiplier, rel_budget } => {
                let j = node_at(time)?;
                let got = table.mean_sq[j];
                let tol = se_multiplier * table.std_err[j] + rel_budget * expected.abs();
                let ok = (got - expected).abs() <= tol;
                Ok((ok, format!("m({time}) = {got} vs {expected} (tolerance {tol:.3e})")))
            }
            OracleSection::MomentOde { rate, times, se_multiplier, rel_budget } => {
                let m0 = table.mean_sq[0];
                let mut detail = String::new();
                let mut ok = true;
                for time in times {
                    let j = node_at(time)?;
                    let expected = m0 * (rate * time).exp();
                    let got = table.mean_sq[j];
                    let tol = se_multiplier * table.std_err[j] + rel_budget * expected.abs();
                    if (got - expected).abs() > tol {
                        ok = false;
                    }
                    detail.push_str(&format!("m({time}) = {got:.5} vs {expected:.5}; "));
                }
                Ok((ok, detail))
            }
        }
    })();
    check(&format!("preset oracle: {name}"), outcome)
}

/// Runs the whole suite, printing one line per check. Returns true iff every
/// check passed.
pub fn run_all(out: &mut impl Write) -> Result<bool> {
    let mut results = vec![
        check("rkhs L2 domination (random step functions)", rkhs_l2_bound_sweep()),
        check("gamma integral identity grid", gamma_identity_grid()),
        check("scalar Wiener isometry (Monte Carlo)", scalar_isometry_mc()),
        check("q-fbm second-moment bound (Monte Carlo)", qfbm_bound_mc()),
        check("semigroup laws and fractional powers", semigroup_laws()),
    ];
    for (name, json) in embedded_presets() {
        results.push(run_preset_oracle(name, json));
    }
    let mut all = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        writeln!(out, "[{tag}] {} - {}", r.name, r.detail)?;
        all &= r.passed;
    }
    Ok(all)
}
