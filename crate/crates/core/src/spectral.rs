//! Truncated spectral model of the state space: a self-adjoint generator with
//! eigenpairs (-mu_k, e_k), the analytic semigroup e^{tA}, fractional powers
//! (-A)^alpha, and the trace-class cylindrical fractional noise built from
//! independent scalar paths per mode.
//!
//! Everything is diagonal in one shared eigenbasis, so semigroup and power
//! applications are exact and every bound is testable without operator
//! approximation error.

use crate::error::{Error, Result};
use crate::fbm::{FbmSampler, HurstParameter};
use crate::grid::TimeGrid;
use crate::numeric::CompensatedSum;
use crate::rng::{substream, StreamDomain};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Truncated state space: A e_k = -mu_k e_k with 0 < mu_1 <= mu_2 <= ...
/// (0 is in the resolvent set, so inverse powers are bounded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
}

impl SpectralModel {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::hypothesis("H.1", "model needs at least one eigenvalue"));
        }
        if !(eigenvalues[0] > 0.0) || !eigenvalues[0].is_finite() {
            return Err(Error::hypothesis(
                "H.1",
                format!(
                    "smallest eigenvalue must be positive (0 in the resolvent set), got {}",
                    eigenvalues[0]
                ),
            ));
        }
        if eigenvalues.windows(2).any(|w| !(w[1] >= w[0]) || !w[1].is_finite()) {
            return Err(Error::hypothesis(
                "H.1",
                "eigenvalues must be finite and nondecreasing",
            ));
        }
        Ok(SpectralModel { eigenvalues })
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue mu_1; the sharp decay rate of the semigroup.
    pub fn mu_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension() {
            return Err(Error::domain(format!(
                "vector has {} coefficients, model dimension is {}",
                v.len(),
                self.dimension()
            )));
        }
        Ok(())
    }
}

/// Applies the semigroup S(t): component-wise e^{-mu_k t}.
pub fn semigroup_apply(model: &SpectralModel, t: f64, v: &[f64]) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::domain(format!("semigroup time must be >= 0, got {t}")));
    }
    model.check_vector(v)?;
    Ok(model
        .eigenvalues
        .iter()
        .zip(v.iter())
        .map(|(mu, x)| (-mu * t).exp() * x)
        .collect())
}

/// Applies the fractional power (-A)^alpha: component-wise mu_k^alpha.
/// Negative alpha gives the bounded inverse power.
pub fn fractional_power_apply(model: &SpectralModel, alpha: f64, v: &[f64]) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!(
            "fractional power exponent must lie in [-1, 1], got {alpha}"
        )));
    }
    model.check_vector(v)?;
    Ok(model
        .eigenvalues
        .iter()
        .zip(v.iter())
        .map(|(mu, x)| mu.powf(alpha) * x)
        .collect())
}

/// Smallest constant M_{1-beta} with
/// ||(-A)^{1-beta} S(t)|| <= M_{1-beta} t^{-(1-beta)} e^{-lambda t} for t > 0.
///
/// Per mode the supremum of t^{1-beta} e^{-(mu_k - lambda) t} is attained at
/// t* = (1-beta)/(mu_k-lambda), giving
/// ((1-beta)/e)^{1-beta} (mu_k/(mu_k-lambda))^{1-beta}; the result maximizes
/// over modes. Requires lambda strictly below mu_1 so every factor is finite.
pub fn smoothing_constant(model: &SpectralModel, beta: f64, lambda_choice: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(lambda_choice > 0.0 && lambda_choice < model.mu_min()) {
        return Err(Error::domain(format!(
            "lambda_choice must lie in (0, mu_1) = (0, {}), got {lambda_choice}",
            model.mu_min()
        )));
    }
    let a = 1.0 - beta;
    let base = (a / std::f64::consts::E).powf(a);
    Ok(model
        .eigenvalues
        .iter()
        .map(|mu| base * (mu / (mu - lambda_choice)).powf(a))
        .fold(f64::MIN, f64::max))
}

/// Covariance operator of the driving noise: Q e_n = lambda_n e_n with
/// lambda_n >= 0. Finite truncation, so the trace is trivially finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QCovariance {
    eigenvalues: Vec<f64>,
}

impl QCovariance {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::domain("Q needs at least one eigenvalue"));
        }
        if eigenvalues.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::domain("Q eigenvalues must be finite and nonnegative"));
        }
        Ok(QCovariance { eigenvalues })
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Retained trace of the finite truncation (discarded tail is 0).
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// Per-mode increments of sqrt(lambda_n) beta_n^H on each grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct QfbmIncrements {
    pub grid: TimeGrid,
    /// `per_mode[n][j]` is the increment of sqrt(lambda_n) beta_n^H over cell j.
    pub per_mode: Vec<Vec<f64>>,
}

impl QfbmIncrements {
    pub fn n_modes(&self) -> usize {
        self.per_mode.len()
    }
}

/// Sampler for the trace-class fractional noise: one shared scalar factor,
/// independent deterministic substreams per (seed, path, mode).
#[derive(Debug, Clone)]
pub struct QfbmSampler {
    base: FbmSampler,
    q: QCovariance,
}

impl QfbmSampler {
    pub fn new(q: QCovariance, hurst: HurstParameter, grid: TimeGrid) -> Result<Self> {
        Ok(QfbmSampler {
            base: FbmSampler::new(grid, hurst)?,
            q,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.base.grid()
    }

    pub fn q(&self) -> &QCovariance {
        &self.q
    }

    pub fn sample(&self, seed: u64, path_index: u64) -> QfbmIncrements {
        let n = self.base.grid().n_steps();
        let per_mode = self
            .q
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(mode, lambda)| {
                if *lambda == 0.0 {
                    vec![0.0; n]
                } else {
                    let root = lambda.sqrt();
                    let mut rng = substream(seed, StreamDomain::QFbm, path_index, mode as u64);
                    self.base
                        .increments_from_rng(&mut rng)
                        .into_iter()
                        .map(|dx| root * dx)
                        .collect()
                }
            })
            .collect();
        QfbmIncrements {
            grid: *self.base.grid(),
            per_mode,
        }
    }
}

/// One realization of the noise increments, deterministic per seed.
pub fn sample_qfbm(
    model: &SpectralModel,
    q: &QCovariance,
    hurst: HurstParameter,
    grid: TimeGrid,
    seed: u64,
) -> Result<QfbmIncrements> {
    if q.n_modes() > model.dimension() {
        return Err(Error::domain(format!(
            "noise has {} modes but the model dimension is {}",
            q.n_modes(),
            model.dimension()
        )));
    }
    Ok(QfbmSampler::new(q.clone(), hurst, grid)?.sample(seed, 0))
}

/// Diagonal operator schedule: per mode, the diagonal entry of psi(t_j) on
/// each grid cell (value frozen on [t_j, t_{j+1})).
#[derive(Debug, Clone)]
pub struct DiagonalSchedule {
    pub grid: TimeGrid,
    /// `per_mode[n][j]` is the diagonal entry for mode n on cell j.
    pub per_mode: Vec<Vec<f64>>,
}

impl DiagonalSchedule {
    pub fn constant(grid: TimeGrid, diag: &[f64]) -> Self {
        DiagonalSchedule {
            grid,
            per_mode: diag.iter().map(|d| vec![*d; grid.n_steps()]).collect(),
        }
    }

    /// Q-Hilbert-Schmidt norm squared sum_n lambda_n ||psi(t_j) e_n||^2 on cell j.
    fn hs_norm_sq_at(&self, q: &QCovariance, j: usize) -> f64 {
        self.per_mode
            .iter()
            .zip(q.eigenvalues())
            .map(|(row, l)| l * row[j] * row[j])
            .sum()
    }
}

/// Monte Carlo check of the Wiener-integral second-moment bound
/// E||\int_0^T psi dB^H||^2 <= 2 H T^{2H-1} \int_0^T ||psi||^2_{HS} ds.
#[derive(Debug, Clone, Copy)]
pub struct MomentBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub std_err: f64,
    pub holds: bool,
}

pub fn qfbm_moment_bound_check(
    model: &SpectralModel,
    q: &QCovariance,
    schedule: &DiagonalSchedule,
    hurst: HurstParameter,
    n_paths: usize,
    seed: u64,
) -> Result<MomentBoundCheck> {
    if q.n_modes() > model.dimension() {
        return Err(Error::domain("noise modes exceed the model dimension"));
    }
    if schedule.per_mode.len() != q.n_modes() {
        return Err(Error::domain(format!(
            "schedule covers {} modes, Q has {}",
            schedule.per_mode.len(),
            q.n_modes()
        )));
    }
    if n_paths < 2 {
        return Err(Error::domain("the bound check needs at least 2 paths"));
    }
    let grid = schedule.grid;
    let sampler = QfbmSampler::new(q.clone(), hurst, grid)?;
    // Parallel across paths; the reduction runs in path order so the result
    // does not depend on the thread count.
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let noise = sampler.sample(seed, p);
            let mut norm_sq = 0.0;
            for (mode, row) in schedule.per_mode.iter().enumerate() {
                // Increments already carry sqrt(lambda); left-point sums per mode.
                let y: f64 = row
                    .iter()
                    .zip(noise.per_mode[mode].iter())
                    .map(|(psi, db)| psi * db)
                    .sum();
                norm_sq += y * y;
            }
            norm_sq
        })
        .collect();
    let mut sum = CompensatedSum::new();
    let mut sum_sq = CompensatedSum::new();
    for norm_sq in samples {
        sum.add(norm_sq);
        sum_sq.add(norm_sq * norm_sq);
    }
    let n = n_paths as f64;
    let lhs = sum.value() / n;
    let var = ((sum_sq.value() - n * lhs * lhs) / (n - 1.0)).max(0.0);
    let std_err = (var / n).sqrt();
    let h = hurst.value();
    let t = grid.horizon();
    let integral: f64 = (0..grid.n_steps())
        .map(|j| schedule.hs_norm_sq_at(q, j) * grid.step())
        .sum();
    let rhs = 2.0 * h * t.powf(2.0 * h - 1.0) * integral;
    Ok(MomentBoundCheck {
        lhs,
        rhs,
        std_err,
        holds: lhs <= rhs + 5.0 * std_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::rkhs_scalar_product;
    use crate::grid::StepFunction;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn h(v: f64) -> HurstParameter {
        HurstParameter::new(v).unwrap()
    }

    fn model2() -> SpectralModel {
        SpectralModel::new(vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn model_rejects_bad_spectra() {
        assert!(SpectralModel::new(vec![]).is_err());
        assert!(SpectralModel::new(vec![0.0, 1.0]).is_err());
        assert!(SpectralModel::new(vec![-1.0]).is_err());
        assert!(SpectralModel::new(vec![2.0, 1.0]).is_err());
        match SpectralModel::new(vec![0.0]) {
            Err(Error::Hypothesis { name, .. }) => assert_eq!(name, "H.1"),
            other => panic!("expected H.1 violation, got {other:?}"),
        }
    }

    #[test]
    fn semigroup_identity_and_decay() {
        let m = model2();
        let v = vec![1.0, 1.0];
        assert_eq!(semigroup_apply(&m, 0.0, &v).unwrap(), v);
        let w = semigroup_apply(&m, 2.0f64.ln(), &v).unwrap();
        assert_relative_eq!(w[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(w[1], 0.25, max_relative = 1e-15);
        assert!(semigroup_apply(&m, -0.1, &v).is_err());
        assert!(semigroup_apply(&m, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn semigroup_composition_law() {
        let m = model2();
        let v = vec![0.3, -1.2];
        for (t, s) in [(0.1, 0.7), (1.5, 2.5), (0.0, 3.0)] {
            let a = semigroup_apply(&m, t, &semigroup_apply(&m, s, &v).unwrap()).unwrap();
            let b = semigroup_apply(&m, t + s, &v).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                assert_relative_eq!(x, y, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn semigroup_contracts_with_first_mode_rate() {
        let m = model2();
        let v = vec![0.8, -0.6];
        let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
        for t in [0.1, 0.5, 2.0] {
            let w = semigroup_apply(&m, t, &v).unwrap();
            assert!(norm(&w) <= (-m.mu_min() * t).exp() * norm(&v) + 1e-15);
        }
    }

    #[test]
    fn fractional_powers_compose_and_invert() {
        let m = model2();
        let v = vec![1.0, 1.0];
        assert_eq!(fractional_power_apply(&m, 0.0, &v).unwrap(), v);
        let av = fractional_power_apply(&m, 1.0, &v).unwrap();
        assert_eq!(av, vec![1.0, 2.0]);
        // (-A)^alpha (-A)^{-alpha} = I.
        let alpha = 0.37;
        let w = fractional_power_apply(
            &m,
            -alpha,
            &fractional_power_apply(&m, alpha, &v).unwrap(),
        )
        .unwrap();
        for (x, y) in w.iter().zip(v.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
        // Composition within range.
        let w1 = fractional_power_apply(
            &m,
            0.25,
            &fractional_power_apply(&m, 0.5, &v).unwrap(),
        )
        .unwrap();
        let w2 = fractional_power_apply(&m, 0.75, &v).unwrap();
        for (x, y) in w1.iter().zip(w2.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-13);
        }
        assert!(fractional_power_apply(&m, 1.5, &v).is_err());
    }

    #[test]
    fn inverse_power_operator_norm() {
        // ||(-A)^{-beta}|| = mu_1^{-beta}: the smallest eigenvalue dominates.
        let m = model2();
        let beta = 0.5;
        let e1 = fractional_power_apply(&m, -beta, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(e1[0], 1.0f64.powf(-beta), max_relative = 1e-15);
        let e2 = fractional_power_apply(&m, -beta, &[0.0, 1.0]).unwrap();
        assert!(e2[1] < e1[0]);
    }

    #[test]
    fn powers_commute_with_semigroup() {
        // Diagonal operators commute; composition order only reorders the
        // two scalar multiplications, so agreement is ulp-level.
        let m = model2();
        let v = vec![0.4, 1.3];
        let a = fractional_power_apply(&m, 0.6, &semigroup_apply(&m, 0.8, &v).unwrap()).unwrap();
        let b = semigroup_apply(&m, 0.8, &fractional_power_apply(&m, 0.6, &v).unwrap()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-15);
        }
    }

    #[test]
    fn smoothing_constant_single_mode_closed_form() {
        // mu = 1, beta = 0.5, lambda = 0.5: sup of sqrt(t) e^{-t/2} = (1/e)^{1/2} at t = 1,
        // so M_{1/2} = (0.5/e)^{0.5} * 2^{0.5} = e^{-1/2}.
        let m = SpectralModel::new(vec![1.0]).unwrap();
        let got = smoothing_constant(&m, 0.5, 0.5).unwrap();
        assert_relative_eq!(got, (-0.5f64).exp(), max_relative = 1e-12);
        // Numerical maximization oracle on a fine time grid.
        let oracle = (0..200_000)
            .map(|i| {
                let t = 1e-6 + i as f64 * 5e-5;
                t.powf(0.5) * (-0.5 * t).exp()
            })
            .fold(f64::MIN, f64::max);
        assert_relative_eq!(got, oracle, max_relative = 1e-6);
    }

    #[test]
    fn smoothing_constant_beta_near_one() {
        let m = SpectralModel::new(vec![3.0, 5.0]).unwrap();
        let got = smoothing_constant(&m, 1.0 - 1e-9, 1.0).unwrap();
        assert_relative_eq!(got, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn smoothing_constant_rejects_large_lambda() {
        let m = model2();
        assert!(smoothing_constant(&m, 0.5, 1.0).is_err());
        assert!(smoothing_constant(&m, 0.5, 1.5).is_err());
        assert!(smoothing_constant(&m, 1.2, 0.5).is_err());
    }

    #[test]
    fn smoothing_inequality_random_sweep() {
        let m = SpectralModel::new(vec![1.0, 2.0, 4.5]).unwrap();
        let beta = 0.3;
        let lambda = 0.9;
        let cap = smoothing_constant(&m, beta, lambda).unwrap();
        let mut rng = substream(17, StreamDomain::QFbm, 0, 99);
        use rand::Rng;
        for _ in 0..100 {
            let t: f64 = rng.random::<f64>() * 5.0 + 1e-6;
            let k = rng.random_range(0..3);
            let mu: f64 = m.eigenvalues()[k];
            let lhs = mu.powf(1.0 - beta) * (-mu * t).exp();
            let rhs = cap * t.powf(-(1.0 - beta)) * (-lambda * t).exp();
            assert!(lhs <= rhs * (1.0 + 1e-12), "t={t} k={k}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn degenerate_q_gives_single_active_mode() {
        let m = model2();
        let q = QCovariance::new(vec![1.0, 0.0]).unwrap();
        let grid = TimeGrid::new(1.0 / 32.0, 32).unwrap();
        let inc = sample_qfbm(&m, &q, h(0.7), grid, 5).unwrap();
        assert_eq!(inc.n_modes(), 2);
        assert!(inc.per_mode[0].iter().any(|x| *x != 0.0));
        assert!(inc.per_mode[1].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn qfbm_mode_count_cannot_exceed_dimension() {
        let m = SpectralModel::new(vec![1.0]).unwrap();
        let q = QCovariance::new(vec![1.0, 0.5]).unwrap();
        let grid = TimeGrid::new(0.25, 4).unwrap();
        assert!(sample_qfbm(&m, &q, h(0.7), grid, 5).is_err());
    }

    #[test]
    fn qfbm_norm_second_moment_matches_trace_scaling() {
        // E||B^H(t)||^2 = t^{2H} tr(Q); 20k paths, 5 standard errors.
        let q = QCovariance::new(vec![0.7, 0.3]).unwrap();
        let hp = h(0.7);
        let grid = TimeGrid::new(1.0 / 16.0, 16).unwrap();
        let sampler = QfbmSampler::new(q.clone(), hp, grid).unwrap();
        let n = 20_000u64;
        let mut vals = Vec::with_capacity(n as usize);
        for p in 0..n {
            let inc = sampler.sample(12, p);
            let norm_sq: f64 = inc
                .per_mode
                .iter()
                .map(|row| row.iter().sum::<f64>().powi(2))
                .sum();
            vals.push(norm_sq);
        }
        let nf = n as f64;
        let mean = vals.iter().sum::<f64>() / nf;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let se = (var / nf).sqrt();
        let expect = grid.horizon().powf(2.0 * 0.7) * q.trace();
        assert!(
            (mean - expect).abs() <= 5.0 * se,
            "norm moment {mean} vs {expect}, se {se}"
        );
    }

    #[test]
    fn qfbm_modes_are_uncorrelated() {
        let q = QCovariance::new(vec![1.0, 1.0]).unwrap();
        let grid = TimeGrid::new(1.0 / 8.0, 8).unwrap();
        let sampler = QfbmSampler::new(q, h(0.8), grid).unwrap();
        let n = 20_000u64;
        let mut prods = Vec::with_capacity(n as usize);
        for p in 0..n {
            let inc = sampler.sample(3, p);
            let a: f64 = inc.per_mode[0].iter().sum();
            let b: f64 = inc.per_mode[1].iter().sum();
            prods.push(a * b);
        }
        let nf = n as f64;
        let mean = prods.iter().sum::<f64>() / nf;
        let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let se = (var / nf).sqrt();
        assert!(mean.abs() <= 5.0 * se, "cross-mode corr {mean}, se {se}");
    }

    #[test]
    fn moment_bound_zero_schedule() {
        let m = model2();
        let q = QCovariance::new(vec![1.0, 0.5]).unwrap();
        let grid = TimeGrid::new(1.0 / 8.0, 8).unwrap();
        let schedule = DiagonalSchedule::constant(grid, &[0.0, 0.0]);
        let chk = qfbm_moment_bound_check(&m, &q, &schedule, h(0.7), 100, 4).unwrap();
        assert_abs_diff_eq!(chk.lhs, 0.0);
        assert_abs_diff_eq!(chk.rhs, 0.0);
        assert!(chk.holds);
    }

    #[test]
    fn moment_bound_identity_single_mode() {
        // psi = identity on one mode with lambda = 1 and t = 1:
        // lhs ~ E beta^H(1)^2 = 1, rhs = 2H.
        let m = SpectralModel::new(vec![1.0]).unwrap();
        let q = QCovariance::new(vec![1.0]).unwrap();
        let grid = TimeGrid::new(1.0 / 64.0, 64).unwrap();
        let schedule = DiagonalSchedule::constant(grid, &[1.0]);
        let chk = qfbm_moment_bound_check(&m, &q, &schedule, h(0.7), 4000, 8).unwrap();
        assert_relative_eq!(chk.rhs, 1.4, max_relative = 1e-12);
        assert!((chk.lhs - 1.0).abs() <= 5.0 * chk.std_err);
        assert!(chk.holds);
    }

    #[test]
    fn moment_bound_random_schedule_with_isometry_oracle() {
        let m = model2();
        let q = QCovariance::new(vec![0.8, 0.4]).unwrap();
        let grid = TimeGrid::new(1.0 / 32.0, 32).unwrap();
        let hp = h(0.8);
        use rand::Rng;
        let mut rng = substream(23, StreamDomain::QFbm, 1, 7);
        let per_mode: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..32).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let schedule = DiagonalSchedule {
            grid,
            per_mode: per_mode.clone(),
        };
        let chk = qfbm_moment_bound_check(&m, &q, &schedule, hp, 4000, 9).unwrap();
        assert!(chk.holds, "lhs {} rhs {} se {}", chk.lhs, chk.rhs, chk.std_err);
        // Isometry oracle per mode: lhs -> sum_n lambda_n <psi_n, psi_n>.
        let expect: f64 = per_mode
            .iter()
            .zip(q.eigenvalues())
            .map(|(row, l)| {
                let f = StepFunction::new(grid, row.clone()).unwrap();
                l * rkhs_scalar_product(&f, &f, hp).unwrap()
            })
            .sum();
        assert!(
            (chk.lhs - expect).abs() <= 5.0 * chk.std_err,
            "lhs {} vs oracle {}, se {}",
            chk.lhs,
            expect,
            chk.std_err
        );
    }
}
