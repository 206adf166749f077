//! Catalog of coefficient functions with analytically known Lipschitz
//! constants, plus the hypothesis checkers used by config validation.
//!
//! The catalog is linear and diagonal on purpose: the stability certificate
//! needs exact constants, and linear maps make them analytic. Drift
//! f(t, x) = C_f x (diagonal gains), neutral map g(t, x) = c_g (-A)^{-beta} x,
//! diffusion sigma(t) = sigma0 e^{-gamma t} D (diagonal), jump map
//! h(t, x, z) = c_h zeta(z) x with the catalog shape zeta(z) = z.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::jumps::MarkSpaceSpec;
use crate::numeric::composite_simpson;
use crate::spectral::{QCovariance, SpectralModel};
use serde::{Deserialize, Serialize};

/// Time profile of the neutral gain c_g(t). The certifiable catalog case is
/// `Constant`; `Step` and `Linear` exist to exercise the time-continuity
/// modulus of the neutral map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainProfile {
    Constant { value: f64 },
    Step { switch_time: f64, before: f64, after: f64 },
    Linear { intercept: f64, slope: f64 },
}

impl GainProfile {
    pub fn constant(value: f64) -> Self {
        GainProfile::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            GainProfile::Constant { value } => *value,
            GainProfile::Step { switch_time, before, after } => {
                if t < *switch_time {
                    *before
                } else {
                    *after
                }
            }
            GainProfile::Linear { intercept, slope } => intercept + slope * t,
        }
    }

    /// sup_t c_g(t)^2 over t >= 0, None when unbounded.
    pub fn sup_sq(&self) -> Option<f64> {
        match self {
            GainProfile::Constant { value } => Some(value * value),
            GainProfile::Step { before, after, .. } => {
                Some((before * before).max(after * after))
            }
            GainProfile::Linear { intercept, slope } => {
                if *slope == 0.0 {
                    Some(intercept * intercept)
                } else {
                    None
                }
            }
        }
    }
}

/// Delay function into [0, tau]: constant, or a sinusoid clipped to the range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelaySpec {
    Constant { value: f64 },
    Sinusoidal { base: f64, amplitude: f64, omega: f64 },
}

impl DelaySpec {
    pub fn eval(&self, t: f64, tau: f64) -> f64 {
        let raw = match self {
            DelaySpec::Constant { value } => *value,
            DelaySpec::Sinusoidal { base, amplitude, omega } => base + amplitude * (omega * t).sin(),
        };
        raw.clamp(0.0, tau)
    }

    fn validate(&self, tau: f64, name: &str) -> Result<()> {
        match self {
            DelaySpec::Constant { value } => {
                if !(*value >= 0.0 && *value <= tau) {
                    return Err(Error::hypothesis(
                        "delay range",
                        format!("constant delay {name} = {value} must lie in [0, tau] = [0, {tau}]"),
                    ));
                }
            }
            DelaySpec::Sinusoidal { base, amplitude, omega } => {
                if !base.is_finite() || !amplitude.is_finite() || !omega.is_finite() {
                    return Err(Error::hypothesis(
                        "delay range",
                        format!("sinusoidal delay {name} has non-finite parameters"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Which of the three delay channels to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayKind {
    /// Neutral-term delay r.
    Neutral,
    /// Drift delay rho.
    Drift,
    /// Jump delay theta.
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayTriple {
    pub r: DelaySpec,
    pub rho: DelaySpec,
    pub theta: DelaySpec,
}

/// The full catalog coefficient set for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    /// Diagonal drift gains (length = model dimension).
    pub drift_gains: Vec<f64>,
    /// Neutral gain profile c_g(t).
    pub neutral_gain: GainProfile,
    /// Fractional exponent beta in (0, 1) of the neutral map.
    pub beta: f64,
    /// Diffusion amplitude sigma0 >= 0.
    pub sigma0: f64,
    /// Exponential decay rate gamma of the diffusion schedule.
    pub sigma_decay: f64,
    /// Diagonal of the (noise-space -> state-space) map D, length = noise modes.
    pub sigma_diag: Vec<f64>,
    /// Jump gain c_h.
    pub jump_gain: f64,
    pub delays: DelayTriple,
    /// Maximum delay tau >= 0.
    pub tau: f64,
}

impl CoefficientSet {
    /// Structural validation against a model and noise covariance.
    pub fn validate(&self, model: &SpectralModel, q: &QCovariance) -> Result<()> {
        if self.drift_gains.len() != model.dimension() {
            return Err(Error::config(format!(
                "field coefficients.drift_gains: expected {} entries (model dimension), got {}",
                model.dimension(),
                self.drift_gains.len()
            )));
        }
        if self.drift_gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::hypothesis("H.2", "drift gains must be finite"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::hypothesis(
                "H.3",
                format!("beta must lie strictly in (0, 1), got {}", self.beta),
            ));
        }
        if self.neutral_gain.sup_sq().is_none() {
            return Err(Error::hypothesis(
                "H.3",
                "neutral gain profile is unbounded in time; no uniform Lipschitz constant exists",
            ));
        }
        if !(self.sigma0 >= 0.0) || !self.sigma0.is_finite() || !self.sigma_decay.is_finite() {
            return Err(Error::hypothesis(
                "H.5",
                format!(
                    "diffusion schedule needs sigma0 >= 0 and finite decay, got sigma0={}, decay={}",
                    self.sigma0, self.sigma_decay
                ),
            ));
        }
        if self.sigma_diag.len() != q.n_modes() {
            return Err(Error::config(format!(
                "field coefficients.sigma_diag: expected {} entries (noise modes), got {}",
                q.n_modes(),
                self.sigma_diag.len()
            )));
        }
        if !self.jump_gain.is_finite() {
            return Err(Error::hypothesis("H.6", "jump gain must be finite"));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::hypothesis(
                "delay range",
                format!("tau must be finite and >= 0, got {}", self.tau),
            ));
        }
        self.delays.r.validate(self.tau, "r")?;
        self.delays.rho.validate(self.tau, "rho")?;
        self.delays.theta.validate(self.tau, "theta")?;
        Ok(())
    }

    /// Diagonal entry of sigma(t) for noise mode n.
    pub fn sigma_coeff(&self, t: f64, mode: usize) -> f64 {
        self.sigma0 * (-self.sigma_decay * t).exp() * self.sigma_diag[mode]
    }

    /// Q-Hilbert-Schmidt norm squared of sigma(t).
    pub fn sigma_hs_norm_sq(&self, t: f64, q: &QCovariance) -> f64 {
        let factor = self.sigma0 * (-self.sigma_decay * t).exp();
        factor
            * factor
            * q.eigenvalues()
                .iter()
                .zip(self.sigma_diag.iter())
                .map(|(l, d)| l * d * d)
                .sum::<f64>()
    }
}

/// Evaluates one delay channel at time t (clipped into [0, tau]).
pub fn evaluate_delay(set: &CoefficientSet, which: DelayKind, t: f64) -> f64 {
    let spec = match which {
        DelayKind::Neutral => &set.delays.r,
        DelayKind::Drift => &set.delays.rho,
        DelayKind::Jump => &set.delays.theta,
    };
    spec.eval(t, set.tau)
}

/// The analytic constants entering the hypotheses and the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisConstants {
    /// Squared Lipschitz constant of the drift: max_k C_{f,k}^2.
    pub k1: f64,
    /// Squared Lipschitz constant of (-A)^beta g: sup_t c_g(t)^2.
    pub k2: f64,
    /// Jump constant \int |h(t,x,z)-h(t,y,z)|^2 nu(dz) / |x-y|^2 = c_h^2 \int zeta^2 d nu.
    pub k3: f64,
    pub beta: f64,
    /// Operator norm of (-A)^{-beta} = mu_1^{-beta}.
    pub norm_inv_beta: f64,
    /// Decay rate of the diffusion schedule.
    pub gamma_sigma: f64,
}

/// Derives the analytic hypothesis constants for a catalog coefficient set.
pub fn derive_constants(
    set: &CoefficientSet,
    model: &SpectralModel,
    marks: &MarkSpaceSpec,
) -> Result<HypothesisConstants> {
    if !(set.beta > 0.0 && set.beta < 1.0) {
        return Err(Error::domain(format!(
            "beta must lie strictly in (0, 1), got {}",
            set.beta
        )));
    }
    let k1 = set
        .drift_gains
        .iter()
        .map(|g| g * g)
        .fold(0.0f64, f64::max);
    let k2 = set.neutral_gain.sup_sq().ok_or_else(|| {
        Error::domain("neutral gain profile is unbounded; cannot derive a uniform K2")
    })?;
    let k3 = set.jump_gain * set.jump_gain * marks.second_moment_weight;
    Ok(HypothesisConstants {
        k1,
        k2,
        k3,
        beta: set.beta,
        norm_inv_beta: model.mu_min().powf(-set.beta),
        gamma_sigma: set.sigma_decay,
    })
}

/// Weighted diffusion energy \int_0^T e^{2 gamma s} ||sigma(s)||^2_{HS} ds by
/// grid quadrature; finite for every catalog schedule.
pub fn sigma_exponential_moment(
    set: &CoefficientSet,
    q: &QCovariance,
    horizon: f64,
    gamma_probe: f64,
) -> Result<(f64, bool)> {
    if !(gamma_probe > 0.0) {
        return Err(Error::domain(format!(
            "gamma probe must be positive, got {gamma_probe}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let f = |s: f64| (2.0 * gamma_probe * s).exp() * set.sigma_hs_norm_sq(s, q);
    let integral = composite_simpson(&f, 0.0, horizon, 8192);
    Ok((integral, integral.is_finite()))
}

/// Time-continuity modulus of the neutral map: the largest gap of
/// (-A)^beta g(t, x) between adjacent grid nodes for a unit state.
pub fn neutral_time_modulus(set: &CoefficientSet, grid: &TimeGrid) -> f64 {
    (0..grid.n_steps())
        .map(|j| {
            (set.neutral_gain.value(grid.node(j + 1)) - set.neutral_gain.value(grid.node(j))).abs()
        })
        .fold(0.0f64, f64::max)
}
