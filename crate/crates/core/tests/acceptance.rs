//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one pass/fail line (run with `cargo test --test acceptance -- --nocapture`
//! to see them; test names mirror the criteria).

use nsfde::coefficients::{DelaySpec, DelayTriple, GainProfile};
use nsfde::config::ExperimentConfig;
use nsfde::jumps::{MarkSampler, MarkSpaceSpec};
use nsfde::rng::{substream, StreamDomain};
use nsfde::run::{run, Command, RunOptions};
use nsfde::selftest::{PRESET_FRACTIONAL_OU, PRESET_JUMP_ONLY, PRESET_SEMIGROUP_ONLY};
use nsfde::solver::{
    initial_iterate, picard_apply, Experiment, HistoryPath, InitialDatum, SolverConfig,
};
use nsfde::spectral::{
    fractional_power_apply, qfbm_moment_bound_check, semigroup_apply, smoothing_constant,
    DiagonalSchedule, QCovariance, SpectralModel,
};
use nsfde::stability::{
    contraction_constant, fit_decay_rate, gamma_identity_check, SemigroupBounds,
};
use nsfde::{
    derive_constants, rkhs_scalar_product, CoefficientSet, FbmSampler, HurstParameter,
    HypothesisConstants, StepFunction, TimeGrid,
};
use rand::Rng;
use rayon::prelude::*;
use std::time::Instant;

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} - {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "{criterion}: {detail}");
}

fn hurst(v: f64) -> HurstParameter {
    HurstParameter::new(v).unwrap()
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn acceptance_01_fbm_covariance() {
    let start = Instant::now();
    let grid = TimeGrid::new(1.0 / 512.0, 512).unwrap();
    let n_paths = 20_000u64;
    // Ten probe pairs as node indices on the 2^9 grid of [0, 1].
    let probes: [(usize, usize); 10] = [
        (128, 256),
        (256, 512),
        (64, 448),
        (384, 384),
        (32, 512),
        (160, 320),
        (256, 256),
        (128, 512),
        (192, 480),
        (64, 128),
    ];
    let mut worst = 0.0f64;
    for h in [0.6, 0.75, 0.9] {
        let hp = hurst(h);
        let sampler = FbmSampler::new(grid, hp).unwrap();
        let paths: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|p| sampler.sample_path(90210, p).values)
            .collect();
        for (i, j) in probes {
            let expect =
                nsfde::covariance(grid.node(i), grid.node(j), hp).unwrap();
            let products: Vec<f64> = paths.iter().map(|v| v[i] * v[j]).collect();
            let (mean, se) = mean_and_se(&products);
            let dev = (mean - expect).abs() / se;
            worst = worst.max(dev);
            assert!(
                dev <= 5.0,
                "H={h} probe ({i},{j}): {mean} vs {expect}, {dev:.2} se"
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "1 (fBm covariance MC)",
        elapsed < 60.0,
        &format!("30 probes within 5 se (worst {worst:.2} se), {elapsed:.1} s < 60 s"),
    );
}

#[test]
fn acceptance_02_wiener_isometry_and_moment_bound() {
    let start = Instant::now();
    let grid = TimeGrid::new(1.0 / 1024.0, 1024).unwrap();
    let hp = hurst(0.7);
    let model = SpectralModel::new(vec![1.0, 2.0]).unwrap();
    let q = QCovariance::new(vec![0.7, 0.3]).unwrap();
    let n = grid.n_steps();

    let mut rng = substream(2024, StreamDomain::Marks, 0, 0);
    let random_row: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let window: Vec<f64> = (0..n)
        .map(|j| {
            let t = grid.node(j);
            if (0.25..0.75).contains(&t) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let integrands: [(&str, Vec<Vec<f64>>); 3] = [
        ("constant", vec![vec![1.0; n], vec![1.0; n]]),
        (
            "indicators",
            vec![
                StepFunction::indicator(grid, 0.5).values().to_vec(),
                window.clone(),
            ],
        ),
        (
            "random",
            vec![random_row.clone(), random_row.iter().rev().copied().collect()],
        ),
    ];

    let mut details = String::new();
    for (name, per_mode) in integrands {
        let schedule = DiagonalSchedule {
            grid,
            per_mode: per_mode.clone(),
        };
        let chk = qfbm_moment_bound_check(&model, &q, &schedule, hp, 10_000, 777).unwrap();
        assert!(
            chk.holds,
            "{name}: moment bound violated: lhs {} rhs {}",
            chk.lhs, chk.rhs
        );
        // Double-integral scalar-product oracle per mode.
        let oracle: f64 = per_mode
            .iter()
            .zip(q.eigenvalues())
            .map(|(row, l)| {
                let f = StepFunction::new(grid, row.clone()).unwrap();
                l * rkhs_scalar_product(&f, &f, hp).unwrap()
            })
            .sum();
        let tol = 5.0 * chk.std_err + 0.03 * oracle;
        assert!(
            (chk.lhs - oracle).abs() <= tol,
            "{name}: lhs {} vs oracle {oracle}, tol {tol}",
            chk.lhs
        );
        details.push_str(&format!("{name}: lhs {:.4} ~ {:.4}; ", chk.lhs, oracle));
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "2 (isometry + second-moment bound)",
        elapsed < 120.0,
        &format!("{details}{elapsed:.1} s < 120 s"),
    );
}

#[test]
fn acceptance_03_semigroup_powers_and_smoothing() {
    let model = SpectralModel::new(vec![1.0, 2.0, 4.5]).unwrap();
    let v = vec![0.7, -1.1, 0.4];
    let mut worst = 0.0f64;
    for (a, b) in semigroup_apply(&model, 0.0, &v).unwrap().iter().zip(v.iter()) {
        worst = worst.max((a - b).abs());
    }
    for (t, s) in [(0.3, 0.9), (1.5, 0.1), (2.0, 2.0)] {
        let lhs = semigroup_apply(&model, t, &semigroup_apply(&model, s, &v).unwrap()).unwrap();
        let rhs = semigroup_apply(&model, t + s, &v).unwrap();
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    for alpha in [0.25, 0.5, 0.75, 1.0] {
        let w = fractional_power_apply(
            &model,
            -alpha,
            &fractional_power_apply(&model, alpha, &v).unwrap(),
        )
        .unwrap();
        for (a, b) in w.iter().zip(v.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-12, "identity violation {worst}");

    // Smoothing inequality on a 100-point random sweep.
    let beta = 0.35;
    let lambda = 0.8;
    let cap = smoothing_constant(&model, beta, lambda).unwrap();
    let mut rng = substream(303, StreamDomain::Marks, 0, 0);
    for _ in 0..100 {
        let t: f64 = rng.random::<f64>() * 6.0 + 1e-6;
        let k = rng.random_range(0..3);
        let mu = model.eigenvalues()[k];
        let lhs = mu.powf(1.0 - beta) * (-mu * t).exp();
        let rhs = cap * t.powf(-(1.0 - beta)) * (-lambda * t).exp();
        assert!(lhs <= rhs * (1.0 + 1e-12), "sweep t={t} k={k}");
    }
    report(
        "3 (semigroup/powers exact, smoothing sweep)",
        true,
        &format!("identities exact to {worst:.2e} <= 1e-12; 100-point sweep holds"),
    );
}

#[test]
fn acceptance_04_fractional_ou_oracle_via_cli_pipeline() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("fractional_ou.json");
    std::fs::write(&config_path, PRESET_FRACTIONAL_OU).unwrap();
    run(
        Command::Simulate,
        &RunOptions {
            config: Some(config_path),
            out: Some(dir.path().to_path_buf()),
            seed: None,
            threads: 0,
        },
    )
    .unwrap();
    let csv = std::fs::read_to_string(dir.path().join("moments.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let cols: Vec<&str> = last.split(',').collect();
    let t: f64 = cols[0].parse().unwrap();
    let m1: f64 = cols[1].parse().unwrap();
    let se: f64 = cols[2].parse().unwrap();
    assert!((t - 1.0).abs() < 1e-12);
    let expect = 0.1037251814505925; // double-quadrature oracle
    let tol = 5.0 * se + 0.03 * expect;
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "4 (fractional OU oracle)",
        (m1 - expect).abs() <= tol && elapsed < 120.0,
        &format!("m(1) = {m1:.6} vs {expect:.6} (tol {tol:.2e}), {elapsed:.1} s < 120 s"),
    );
}

#[test]
fn acceptance_05_jump_moment_ode_oracle() {
    let start = Instant::now();
    let cfg = ExperimentConfig::from_json(PRESET_JUMP_ONLY).unwrap();
    let exp = cfg.build().unwrap();
    let table = exp
        .monte_carlo_moments(cfg.monte_carlo.n_paths, cfg.monte_carlo.seed)
        .unwrap();
    // K3 = c_h^2 * intensity * E z^2 = 0.5; m(t) = e^{(-2 mu + K3) t} = e^{-1.5 t}.
    let mut detail = String::new();
    let mut ok = true;
    for target in [0.5f64, 1.0] {
        let j = table
            .times
            .iter()
            .position(|t| (t - target).abs() < 1e-12)
            .unwrap();
        let expect = (-1.5 * target).exp();
        let tol = 5.0 * table.std_err[j] + 0.03 * expect;
        ok &= (table.mean_sq[j] - expect).abs() <= tol;
        detail.push_str(&format!(
            "m({target}) = {:.5} vs {expect:.5} (tol {tol:.2e}); ",
            table.mean_sq[j]
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "5 (jump-only moment ODE)",
        ok && elapsed < 60.0,
        &format!("{detail}{elapsed:.1} s < 60 s"),
    );
}

#[test]
fn acceptance_06_contraction_certificate() {
    // Worked parameter set: theta = 0.1 + 0.04 pi to 1e-10.
    let c = HypothesisConstants {
        k1: 0.01,
        k2: 0.01,
        k3: 0.01,
        beta: 0.5,
        norm_inv_beta: 1.0,
        gamma_sigma: 0.0,
    };
    let bounds = SemigroupBounds {
        m: 1.0,
        lambda: 1.0,
        m_one_minus_beta: 1.0,
    };
    let cert = contraction_constant(&c, &bounds).unwrap();
    let expect = 0.1 + 0.04 * std::f64::consts::PI;
    assert!(
        (cert.theta - expect).abs() <= 1e-10,
        "theta {} vs {expect}",
        cert.theta
    );
    assert!(cert.passes);

    // Monotonicity signs by finite differences on 50 random points.
    let mut rng = substream(606, StreamDomain::Marks, 0, 0);
    let theta = |k1: f64, k2: f64, k3: f64, lambda: f64, beta: f64| {
        contraction_constant(
            &HypothesisConstants {
                k1,
                k2,
                k3,
                beta,
                norm_inv_beta: 1.0,
                gamma_sigma: 0.0,
            },
            &SemigroupBounds {
                m: 1.0,
                lambda,
                m_one_minus_beta: 1.0,
            },
        )
        .unwrap()
        .theta
    };
    for _ in 0..50 {
        let k1 = rng.random::<f64>() * 0.4 + 1e-3;
        let k2 = rng.random::<f64>() * 0.3 + 1e-3;
        let k3 = rng.random::<f64>() * 0.4 + 1e-3;
        let beta = 0.2 + rng.random::<f64>() * 0.6;
        let lambda = 0.5 + rng.random::<f64>() * 2.0;
        let base = theta(k1, k2, k3, lambda, beta);
        let eps = 1e-7;
        assert!(theta(k1 + eps, k2, k3, lambda, beta) > base);
        assert!(theta(k1, k2 + eps, k3, lambda, beta) > base);
        assert!(theta(k1, k2, k3 + eps, lambda, beta) > base);
        assert!(theta(k1, k2, k3, lambda + eps, beta) < base);
    }
    report(
        "6 (contraction certificate)",
        true,
        &format!(
            "theta = {:.12} = 0.1 + 0.04 pi to 1e-10; 50 finite-difference sign checks",
            cert.theta
        ),
    );
}

fn picard_test_experiment() -> Experiment {
    // Horizon and gains are sized so ten iterations neither stall nor hit the
    // floating-point floor: theta ~ 0.38, distances span 1e0 .. 1e-9.
    let set = CoefficientSet {
        drift_gains: vec![-0.3, 0.24],
        neutral_gain: GainProfile::constant(1e-5),
        beta: 0.5,
        sigma0: 0.3,
        sigma_decay: 1.0,
        sigma_diag: vec![1.0, 1.0],
        jump_gain: 0.1,
        delays: DelayTriple {
            r: DelaySpec::Constant { value: 0.25 },
            rho: DelaySpec::Sinusoidal {
                base: 0.2,
                amplitude: 0.1,
                omega: 2.0,
            },
            theta: DelaySpec::Constant { value: 0.125 },
        },
        tau: 0.5,
    };
    Experiment::new(
        SpectralModel::new(vec![1.0, 2.0]).unwrap(),
        QCovariance::new(vec![0.7, 0.3]).unwrap(),
        hurst(0.7),
        MarkSpaceSpec::new(1.0, MarkSampler::Gaussian { mean: 0.0, sd: 1.0 }).unwrap(),
        set,
        InitialDatum::Constant { vector: vec![1.0, -0.5] },
        SolverConfig::new(1.0 / 128.0, 4.0).unwrap(),
    )
    .unwrap()
}

fn sup_distance(a: &HistoryPath, b: &HistoryPath) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.n_nodes() {
        for (x, y) in a.state(i).iter().zip(b.state(i).iter()) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

#[test]
fn acceptance_07_picard_contraction() {
    let start = Instant::now();
    let exp = picard_test_experiment();
    // The configuration passes the certificate with the crate's constant
    // selection (lambda = mu_1, M = 1, smoothing at lambda_choice).
    let constants = derive_constants(&exp.set, &exp.model, &exp.marks).unwrap();
    let lambda = exp.model.mu_min();
    let m1mb = smoothing_constant(&exp.model, constants.beta, lambda * (1.0 - 1e-6)).unwrap();
    let cert = contraction_constant(
        &constants,
        &SemigroupBounds {
            m: 1.0,
            lambda,
            m_one_minus_beta: m1mb,
        },
    )
    .unwrap();
    assert!(cert.passes, "theta = {} must be < 1", cert.theta);

    let gen = exp.noise_generator().unwrap();
    let noise = gen.realize(4242, 0).unwrap();
    assert!(!noise.train.events.is_empty());
    // Start from the constant extension of the datum and iterate.
    let mut current = initial_iterate(&exp.set, &exp.datum, &noise, &exp.cfg).unwrap();
    let mut distances = Vec::new();
    for _ in 0..10 {
        let next = picard_apply(
            &exp.model, &exp.q, &exp.set, &exp.datum, &noise, &current, &exp.cfg,
        )
        .unwrap();
        distances.push(sup_distance(&next, &current));
        current = next;
    }
    let monotone = distances.windows(2).all(|w| w[1] < w[0]);
    let ratio = distances.last().unwrap() / distances[0];
    // Successive-iterate ratios stay below the certificate's pathwise scale.
    let worst_ratio = distances
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "7 (whole-path iteration contracts)",
        monotone && ratio < 1e-6 && worst_ratio <= cert.theta.sqrt() + 0.1 && elapsed < 60.0,
        &format!(
            "theta = {:.4}; final/first = {ratio:.2e} < 1e-6; worst step ratio {worst_ratio:.3} <= sqrt(theta)+0.1; {elapsed:.1} s",
            cert.theta
        ),
    );
}

#[test]
fn acceptance_08_decay_rates() {
    let start = Instant::now();
    // (a) Semigroup-only run recovers a_hat = 2 mu_1 within 2%.
    let cfg = ExperimentConfig::from_json(PRESET_SEMIGROUP_ONLY).unwrap();
    let exp = cfg.build().unwrap();
    let table = exp.monte_carlo_moments(1, 7).unwrap();
    let fit = fit_decay_rate(&table).unwrap();
    assert!(
        (fit.a_hat - 3.0).abs() <= 0.02 * 3.0,
        "semigroup-only a_hat {}",
        fit.a_hat
    );

    // (b) 20 random certificate-passing stochastic configs: a_hat > 0 and
    // r^2 > 0.9, threshold >= 18/20, failures reported.
    let mut rng = substream(808, StreamDomain::Marks, 1, 0);
    let mut passed = 0;
    let mut failures = Vec::new();
    for cfg_idx in 0..20 {
        let mu1 = 0.8 + rng.random::<f64>() * 0.7;
        let mu2 = mu1 + rng.random::<f64>() * 1.5;
        let drift: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 0.4 - 0.2).collect();
        let sigma0 = 0.2 + rng.random::<f64>() * 0.4;
        let sigma_decay = mu1 * (1.2 + rng.random::<f64>() * 0.8);
        let jump_gain = rng.random::<f64>() * 0.15;
        let intensity = 0.5 + rng.random::<f64>() * 1.5;
        let rho = if rng.random::<bool>() {
            DelaySpec::Constant {
                value: rng.random::<f64>() * 0.25,
            }
        } else {
            DelaySpec::Sinusoidal {
                base: 0.15,
                amplitude: 0.1,
                omega: 1.0 + rng.random::<f64>() * 3.0,
            }
        };
        let set = CoefficientSet {
            drift_gains: drift,
            neutral_gain: GainProfile::constant(0.0),
            beta: 0.5,
            sigma0,
            sigma_decay,
            sigma_diag: vec![1.0, 1.0],
            jump_gain,
            delays: DelayTriple {
                r: DelaySpec::Constant { value: 0.0 },
                rho,
                theta: DelaySpec::Constant {
                    value: rng.random::<f64>() * 0.25,
                },
            },
            tau: 0.3,
        };
        let exp = Experiment::new(
            SpectralModel::new(vec![mu1, mu2]).unwrap(),
            QCovariance::new(vec![0.6, 0.4]).unwrap(),
            hurst(0.7),
            MarkSpaceSpec::new(intensity, MarkSampler::Gaussian { mean: 0.0, sd: 1.0 })
                .unwrap(),
            set,
            InitialDatum::Constant {
                vector: vec![1.0, 0.6],
            },
            SolverConfig::new(1.0 / 64.0, 3.0).unwrap(),
        )
        .unwrap();
        // Keep only certificate-passing draws (true by construction ranges).
        let constants = derive_constants(&exp.set, &exp.model, &exp.marks).unwrap();
        let lambda = exp.model.mu_min();
        let m1mb =
            smoothing_constant(&exp.model, constants.beta, lambda * (1.0 - 1e-6)).unwrap();
        let cert = contraction_constant(
            &constants,
            &SemigroupBounds {
                m: 1.0,
                lambda,
                m_one_minus_beta: m1mb,
            },
        )
        .unwrap();
        assert!(cert.passes, "config {cfg_idx}: theta {} >= 1", cert.theta);

        let table = exp.monte_carlo_moments(300, 9000 + cfg_idx).unwrap();
        match fit_decay_rate(&table) {
            Ok(fit) if fit.a_hat > 0.0 && fit.r_squared > 0.9 => passed += 1,
            Ok(fit) => failures.push(format!(
                "config {cfg_idx}: a_hat {:.3}, r2 {:.3}",
                fit.a_hat, fit.r_squared
            )),
            Err(e) => failures.push(format!("config {cfg_idx}: {e}")),
        }
    }
    for f in &failures {
        println!("  decay-fit failure: {f}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "8 (decay-rate recovery)",
        passed >= 18,
        &format!(
            "semigroup-only a_hat = {:.4} (2% of 3.0); stochastic sweep {passed}/20 passed; {elapsed:.1} s",
            fit.a_hat
        ),
    );
}

#[test]
fn acceptance_09_gamma_identity() {
    let mut worst = 0.0f64;
    for ai in 1..=9 {
        let alpha = ai as f64 / 10.0;
        for c in [0.5, 1.0, 2.0, 10.0] {
            let chk = gamma_identity_check(alpha, c).unwrap();
            worst = worst.max(chk.rel_err);
        }
    }
    report(
        "9 (gamma integral identity)",
        worst <= 1e-8,
        &format!("worst relative error {worst:.3e} <= 1e-8 over the (alpha, c) grid"),
    );
}

#[test]
fn acceptance_10_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_nsfde");
    let mut all_equal = true;
    let mut detail = String::new();
    for (name, preset, subcommand) in [
        ("semigroup_only", PRESET_SEMIGROUP_ONLY, "simulate"),
        ("jump_only", PRESET_JUMP_ONLY, "simulate"),
        ("frozen_drift", PRESET_FROZEN_DRIFT_SMALL, "gen-noise"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.json");
        std::fs::write(&config_path, preset).unwrap();
        let mut outputs = Vec::new();
        for run_idx in 0..2 {
            let out = dir.path().join(format!("out{run_idx}"));
            let status = std::process::Command::new(bin)
                .args([
                    subcommand,
                    "--config",
                    config_path.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--threads",
                    "1",
                ])
                .status()
                .unwrap();
            assert!(status.success(), "{name} run {run_idx} failed");
            let mut files: Vec<_> = std::fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
            outputs.push(bytes);
        }
        let equal = outputs[0] == outputs[1];
        all_equal &= equal;
        detail.push_str(&format!("{name}/{subcommand}: byte-identical = {equal}; "));
    }
    report("10 (serial reproducibility)", all_equal, &detail);
}

// frozen_drift with a coarser grid keeps the gen-noise ensemble CSV small.
const PRESET_FROZEN_DRIFT_SMALL: &str = r#"{
  "model": {"eigenvalues": [1.0], "q_eigenvalues": [1.0], "hurst": 0.7},
  "jumps": {"jump_intensity": 0.0, "mark_sampler": {"kind": "degenerate", "value": 0.0}},
  "coefficients": {
    "drift_gains": [-0.5], "neutral_gain": 0.0, "beta": 0.5,
    "sigma0": 0.0, "sigma_decay": 0.0, "jump_gain": 0.0,
    "delays": {
      "r": {"kind": "constant", "value": 0.0},
      "rho": {"kind": "constant", "value": 0.0},
      "theta": {"kind": "constant", "value": 0.0}
    },
    "tau": 0.25
  },
  "initial": {"kind": "constant", "vector": [1.0]},
  "solver": {"step": 0.015625, "horizon": 1.0},
  "monte_carlo": {"n_paths": 16, "seed": 7}
}"#;
