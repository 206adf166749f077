//! Contraction/stability certificate, empirical mean-square decay fitting and
//! the auxiliary Gamma-integral identity used by the certificate derivation.

use crate::coefficients::HypothesisConstants;
use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;
use crate::solver::{InitialDatum, MomentTable};
use serde::Serialize;
use statrs::function::gamma::gamma;

/// Semigroup bounds entering the certificate: ||S(t)|| <= M e^{-lambda t} and
/// the smoothing constant of the fractional power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemigroupBounds {
    pub m: f64,
    pub lambda: f64,
    pub m_one_minus_beta: f64,
}

/// The four addends of the contraction constant (before the factor 4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateComponents {
    pub neutral_static: f64,
    pub neutral_convolution: f64,
    pub drift: f64,
    pub jump: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateConstants {
    pub m: f64,
    pub lambda: f64,
    pub beta: f64,
    pub m_one_minus_beta: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub norm_inv_beta: f64,
}

/// Contraction certificate: theta < 1 certifies existence, uniqueness and
/// mean-square exponential decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCertificate {
    pub theta: f64,
    pub passes: bool,
    pub components: CertificateComponents,
    #[serde(rename = "constants")]
    pub constants_used: CertificateConstants,
}

/// theta = 4 (K2 ||(-A)^{-beta}||^2 + K2 M_{1-beta}^2 lambda^{-2 beta} Gamma(beta)^2
///          + K1 M^2 lambda^{-2} + M^2 K3 / (2 lambda)).
pub fn contraction_constant(
    c: &HypothesisConstants,
    bounds: &SemigroupBounds,
) -> Result<DecayCertificate> {
    if !(bounds.lambda > 0.0) {
        return Err(Error::domain(format!(
            "certificate rate lambda must be positive, got {}",
            bounds.lambda
        )));
    }
    if !(c.beta > 0.0 && c.beta < 1.0) {
        return Err(Error::domain(format!(
            "beta must lie strictly in (0, 1), got {}",
            c.beta
        )));
    }
    let g = gamma(c.beta);
    let components = CertificateComponents {
        neutral_static: c.k2 * c.norm_inv_beta * c.norm_inv_beta,
        neutral_convolution: c.k2
            * bounds.m_one_minus_beta
            * bounds.m_one_minus_beta
            * bounds.lambda.powf(-2.0 * c.beta)
            * g
            * g,
        drift: c.k1 * bounds.m * bounds.m / (bounds.lambda * bounds.lambda),
        jump: bounds.m * bounds.m * c.k3 / (2.0 * bounds.lambda),
    };
    let theta = 4.0
        * (components.neutral_static
            + components.neutral_convolution
            + components.drift
            + components.jump);
    Ok(DecayCertificate {
        theta,
        passes: theta < 1.0,
        components,
        constants_used: CertificateConstants {
            m: bounds.m,
            lambda: bounds.lambda,
            beta: c.beta,
            m_one_minus_beta: bounds.m_one_minus_beta,
            k1: c.k1,
            k2: c.k2,
            k3: c.k3,
            norm_inv_beta: c.norm_inv_beta,
        },
    })
}

/// Log-linear fit of the estimated second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted decay rate (minus the slope of log m(t)).
    pub a_hat: f64,
    /// Fitted prefactor exp(intercept).
    pub m_star_hat: f64,
    pub r_squared: f64,
    /// Time window of the usable nodes.
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Least-squares line through (t_j, log m(t_j)) over nodes with
/// m(t_j) > 10 * standard error (and m > 0).
pub fn fit_decay_rate(table: &MomentTable) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = table
        .times
        .iter()
        .zip(table.mean_sq.iter().zip(table.std_err.iter()))
        .filter(|(_, (m, se))| **m > 0.0 && **m > 10.0 * **se)
        .map(|(t, (m, _))| (*t, m.ln()))
        .collect();
    if usable.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 5 usable nodes, found {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mean_t = usable.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|(t, _)| (t - mean_t) * (t - mean_t)).sum();
    let sxy: f64 = usable
        .iter()
        .map(|(t, y)| (t - mean_t) * (y - mean_y))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "decay fit needs at least two distinct node times".to_string(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let ss_tot: f64 = usable.iter().map(|(_, y)| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: f64 = usable
        .iter()
        .map(|(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(DecayFit {
        a_hat: -slope,
        m_star_hat: intercept.exp(),
        r_squared,
        window: (usable[0].0, usable[usable.len() - 1].0),
        n_points: usable.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaIdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// Numerical check of c^{-alpha} = (1/Gamma(alpha)) \int_0^inf t^{alpha-1} e^{-ct} dt.
///
/// After u = ct the integral is c^{-alpha} \int_0^inf u^{alpha-1} e^{-u} du;
/// on [0, 1] the singular factor is removed by u = w^{1/alpha}, the tail is
/// integrated adaptively up to where e^{-u} underflows the tolerance.
pub fn gamma_identity_check(alpha: f64, c: f64) -> Result<GammaIdentityCheck> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::domain(format!("c must be positive, got {c}")));
    }
    let head = adaptive_simpson(&|w: f64| (-w.powf(1.0 / alpha)).exp(), 0.0, 1.0, 1e-14)? / alpha;
    let tail = adaptive_simpson(&|u: f64| u.powf(alpha - 1.0) * (-u).exp(), 1.0, 45.0, 1e-14)?;
    let lhs = c.powf(-alpha);
    let rhs = lhs * (head + tail) / gamma(alpha);
    Ok(GammaIdentityCheck {
        lhs,
        rhs,
        rel_err: (lhs - rhs).abs() / lhs.abs(),
    })
}

/// Verifies ||phi(t)||^2 <= M0 sup||phi||^2 e^{a t} on a 1000-node probe of
/// [-tau, 0] (the bound decays toward t = -tau; deterministic catalog data are
/// evaluated exactly).
pub fn initial_decay_check(datum: &InitialDatum, tau: f64, m0: f64, a: f64) -> Result<bool> {
    if !(a > 0.0) || !(m0 > 0.0) {
        return Err(Error::domain(format!(
            "initial decay check needs a > 0 and M0 > 0, got a = {a}, M0 = {m0}"
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("tau must be >= 0, got {tau}")));
    }
    let sup_sq = datum.sup_norm_sq(tau);
    let probes = 1000usize;
    for k in 0..probes {
        let t = if tau == 0.0 {
            0.0
        } else {
            -tau + tau * k as f64 / (probes - 1) as f64
        };
        let norm_sq: f64 = datum.value_at(t).iter().map(|x| x * x).sum();
        if norm_sq > m0 * sup_sq * (a * t).exp() * (1.0 + 1e-12) {
            return Ok(false);
        }
    }
    Ok(true)
}
