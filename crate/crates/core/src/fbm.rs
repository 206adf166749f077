//! Scalar fractional Brownian motion with Hurst index in (1/2, 1): covariance,
//! Volterra kernel, exact Gaussian path sampling, the reproducing-kernel scalar
//! product for step functions and left-point Wiener integrals.
//!
//! Sampling is exact: the increment covariance matrix is factored once
//! (Cholesky with a diagonal pivot floor) and i.i.d. normals are mapped through
//! the factor. Paths are deterministic per (seed, path index).

use crate::error::{Error, Result};
use crate::grid::{StepFunction, TimeGrid};
use crate::numeric::{adaptive_simpson, CompensatedSum};
use crate::rng::{substream, StreamDomain};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

/// Hurst index, restricted to the open interval (1/2, 1).
/// The boundary values 1/2 (Brownian motion) and 1 are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParameter(f64);

impl HurstParameter {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) {
            return Err(Error::hypothesis(
                "Hurst",
                format!("Hurst parameter must lie strictly in (1/2, 1), got {h}"),
            ));
        }
        Ok(HurstParameter(h))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstParameter {
    type Error = String;
    fn try_from(h: f64) -> std::result::Result<Self, String> {
        HurstParameter::new(h).map_err(|e| e.to_string())
    }
}

impl From<HurstParameter> for f64 {
    fn from(h: HurstParameter) -> f64 {
        h.0
    }
}

/// Covariance 0.5 (t^{2H} + s^{2H} - |t-s|^{2H}) of the centered Gaussian path.
pub fn covariance(s: f64, t: f64, hurst: HurstParameter) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return Err(Error::domain(format!(
            "covariance needs nonnegative times, got ({s}, {t})"
        )));
    }
    let two_h = 2.0 * hurst.value();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Normalization c_H = sqrt(H(2H-1) / B(2-2H, H-1/2)) of the Volterra kernel.
pub fn volterra_coefficient(hurst: HurstParameter) -> f64 {
    let h = hurst.value();
    (h * (2.0 * h - 1.0) / beta(2.0 - 2.0 * h, h - 0.5)).sqrt()
}

/// Volterra kernel K_H(t, s) = c_H s^{1/2-H} \int_s^t (u-s)^{H-3/2} u^{H-1/2} du
/// for t > s, and exactly 0 for t <= s.
///
/// The integrable endpoint singularity at u = s is removed by the substitution
/// u = s + v^{1/(H-1/2)}, after which the integrand is smooth and an adaptive
/// rule applies.
pub fn volterra_kernel(t: f64, s: f64, hurst: HurstParameter) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!(
            "Volterra kernel is singular at s = 0; needs s > 0, got s = {s}"
        )));
    }
    if t <= s {
        return Ok(0.0);
    }
    let h = hurst.value();
    let a = h - 0.5;
    // \int_s^t (u-s)^{H-3/2} u^{H-1/2} du = (1/a) \int_0^{(t-s)^a} (s + v^{1/a})^a dv
    let upper = (t - s).powf(a);
    let integrand = move |v: f64| (s + v.powf(1.0 / a)).powf(a);
    let integral = adaptive_simpson(&integrand, 0.0, upper, 1e-13 * upper.max(1.0))? / a;
    Ok(volterra_coefficient(hurst) * s.powf(0.5 - h) * integral)
}

/// One sampled path: values at every grid node, values[0] = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFbmPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Largest factorizable grid; exact sampling holds an n x n dense factor.
pub const MAX_SAMPLING_STEPS: usize = 1 << 12;

const PIVOT_FLOOR: f64 = 1e-14;

/// Cholesky factorization with the diagonal pivot floored at 1e-14.
/// Fails only if a pivot is meaningfully negative (beyond roundoff).
fn cholesky_floored(c: &mut [f64], n: usize) -> Result<()> {
    let scale = (0..n)
        .map(|k| c[k * n + k])
        .fold(0.0f64, f64::max)
        .max(PIVOT_FLOOR);
    for k in 0..n {
        let mut d = c[k * n + k];
        for j in 0..k {
            d -= c[k * n + j] * c[k * n + j];
        }
        if d < -1e-8 * scale {
            return Err(Error::numerical(format!(
                "covariance factorization failed at pivot {k}: {d} after flooring"
            )));
        }
        let lkk = d.max(PIVOT_FLOOR).sqrt();
        c[k * n + k] = lkk;
        for i in (k + 1)..n {
            let mut v = c[i * n + k];
            for j in 0..k {
                v -= c[i * n + j] * c[k * n + j];
            }
            c[i * n + k] = v / lkk;
        }
    }
    // Zero the strict upper triangle so the buffer is exactly L.
    for i in 0..n {
        for j in (i + 1)..n {
            c[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Exact Gaussian sampler for fractional Brownian motion on a uniform grid.
/// The increment covariance factor is computed once and shared read-only; each
/// path uses an independent deterministic stream.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: HurstParameter,
    factor: Vec<f64>, // lower-triangular, row-major n x n
}

impl FbmSampler {
    pub fn new(grid: TimeGrid, hurst: HurstParameter) -> Result<Self> {
        let n = grid.n_steps();
        if n > MAX_SAMPLING_STEPS {
            return Err(Error::domain(format!(
                "exact sampling grid is capped at {MAX_SAMPLING_STEPS} steps, got {n}"
            )));
        }
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = increment_covariance(&grid, i, j, hurst)?;
                c[i * n + j] = v;
                c[j * n + i] = v;
            }
        }
        cholesky_floored(&mut c, n)?;
        Ok(FbmSampler {
            grid,
            hurst,
            factor: c,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    /// Correlated increments for one stream: L z with z i.i.d. standard normal.
    pub(crate) fn increments_from_rng(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        let n = self.grid.n_steps();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let mut inc = vec![0.0; n];
        for (i, out) in inc.iter_mut().enumerate() {
            let row = &self.factor[i * n..i * n + i + 1];
            *out = row.iter().zip(z.iter()).map(|(l, zj)| l * zj).sum();
        }
        inc
    }

    /// Deterministic path for (seed, path_index).
    pub fn sample_path(&self, seed: u64, path_index: u64) -> ScalarFbmPath {
        let mut rng = substream(seed, StreamDomain::ScalarFbm, path_index, 0);
        let inc = self.increments_from_rng(&mut rng);
        let mut values = Vec::with_capacity(self.grid.n_nodes());
        values.push(0.0);
        let mut acc = 0.0;
        for dx in inc {
            acc += dx;
            values.push(acc);
        }
        ScalarFbmPath {
            grid: self.grid,
            values,
            seed,
        }
    }
}

/// Covariance of the increments over cells i and j:
/// R(t_{i+1}, t_{j+1}) - R(t_{i+1}, t_j) - R(t_i, t_{j+1}) + R(t_i, t_j).
pub fn increment_covariance(
    grid: &TimeGrid,
    i: usize,
    j: usize,
    hurst: HurstParameter,
) -> Result<f64> {
    let (ti, ti1) = (grid.node(i), grid.node(i + 1));
    let (tj, tj1) = (grid.node(j), grid.node(j + 1));
    Ok(covariance(ti1, tj1, hurst)? - covariance(ti1, tj, hurst)?
        - covariance(ti, tj1, hurst)?
        + covariance(ti, tj, hurst)?)
}

/// Samples `n_paths` paths, deterministic per (seed, path index) and bit-stable
/// under parallel generation.
pub fn sample_fbm_paths(
    grid: TimeGrid,
    hurst: HurstParameter,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<ScalarFbmPath>> {
    if n_paths == 0 {
        return Err(Error::domain("n_paths must be at least 1"));
    }
    let sampler = FbmSampler::new(grid, hurst)?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|p| sampler.sample_path(seed, p))
        .collect())
}

/// Scalar product H(2H-1) \int\int psi(s) phi(t) |t-s|^{2H-2} ds dt of two step
/// functions on a common grid, evaluated exactly per cell pair with the closed
/// double antiderivative of |t-s|^{2H-2}. Diagonal cells never evaluate the
/// integrand at t = s.
pub fn rkhs_scalar_product(
    psi: &StepFunction,
    phi: &StepFunction,
    hurst: HurstParameter,
) -> Result<f64> {
    if psi.grid() != phi.grid() {
        return Err(Error::domain("step functions live on different grids"));
    }
    let n = psi.grid().n_steps();
    let two_h = 2.0 * hurst.value();
    let step = psi.grid().step();
    // |t_a - t_b| is a multiple of the step; tabulate (k*step)^{2H} once.
    let pow_table: Vec<f64> = (0..=n).map(|k| (k as f64 * step).powf(two_h)).collect();
    // Cell-pair weight: 0.5 (P[|d|+1] - 2 P[|d|] + P[|d|-1]) for lag d = j - i.
    let weight = |d: usize| -> f64 {
        let center = pow_table[d];
        let up = pow_table[d + 1];
        let down = if d == 0 { pow_table[1] } else { pow_table[d - 1] };
        0.5 * (up - 2.0 * center + down)
    };
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        for j in 0..n {
            let d = i.abs_diff(j);
            acc.add(psi.values()[i] * phi.values()[j] * weight(d));
        }
    }
    Ok(acc.value())
}

/// Result of the |H|-norm versus L2-norm comparison for a step function.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks ||psi||^2_{|H|} <= 2 H T^{2H-1} \int_0^T psi(s)^2 ds.
pub fn l2_bound_check(psi: &StepFunction, hurst: HurstParameter) -> Result<BoundCheck> {
    let lhs = rkhs_scalar_product(&psi.abs(), &psi.abs(), hurst)?;
    let h = hurst.value();
    let t = psi.grid().horizon();
    let rhs = 2.0 * h * t.powf(2.0 * h - 1.0) * psi.l2_norm_sq();
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// Left-point Wiener integral: sum_j psi(t_j) (path(t_{j+1}) - path(t_j)).
pub fn wiener_integral(psi: &StepFunction, path: &ScalarFbmPath) -> Result<f64> {
    if psi.grid() != &path.grid {
        return Err(Error::domain("integrand grid does not match the path grid"));
    }
    let mut acc = CompensatedSum::new();
    for (j, v) in psi.values().iter().enumerate() {
        acc.add(v * (path.values[j + 1] - path.values[j]));
    }
    Ok(acc.value())
}
