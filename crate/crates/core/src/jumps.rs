//! Stationary Poisson point process with finite characteristic measure:
//! jump-train sampling and compensated-sum bookkeeping. Marks are real-valued
//! with a fixed catalog of samplers whose jump-shape moments (for the catalog
//! shape zeta(z) = z) are known analytically, so the jump Lipschitz constant
//! is exact.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::numeric::CompensatedSum;
use crate::rng::{substream, StreamDomain};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

/// Catalog of mark distributions over the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkSampler {
    Degenerate { value: f64 },
    Uniform { a: f64, b: f64 },
    Gaussian { mean: f64, sd: f64 },
    TwoPoint { z1: f64, p1: f64, z2: f64 },
}

impl MarkSampler {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            MarkSampler::Degenerate { value } => value.is_finite(),
            MarkSampler::Uniform { a, b } => a.is_finite() && b.is_finite() && a <= b,
            MarkSampler::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && *sd >= 0.0,
            MarkSampler::TwoPoint { z1, p1, z2 } => {
                z1.is_finite() && z2.is_finite() && (0.0..=1.0).contains(p1)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::hypothesis("H.6", format!("invalid mark sampler {self:?}")))
        }
    }

    fn mean(&self) -> f64 {
        match self {
            MarkSampler::Degenerate { value } => *value,
            MarkSampler::Uniform { a, b } => 0.5 * (a + b),
            MarkSampler::Gaussian { mean, .. } => *mean,
            MarkSampler::TwoPoint { z1, p1, z2 } => p1 * z1 + (1.0 - p1) * z2,
        }
    }

    fn second_moment(&self) -> f64 {
        match self {
            MarkSampler::Degenerate { value } => value * value,
            MarkSampler::Uniform { a, b } => (a * a + a * b + b * b) / 3.0,
            MarkSampler::Gaussian { mean, sd } => mean * mean + sd * sd,
            MarkSampler::TwoPoint { z1, p1, z2 } => p1 * z1 * z1 + (1.0 - p1) * z2 * z2,
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            MarkSampler::Degenerate { value } => *value,
            MarkSampler::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            MarkSampler::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            MarkSampler::TwoPoint { z1, p1, z2 } => {
                if rng.random::<f64>() < *p1 {
                    *z1
                } else {
                    *z2
                }
            }
        }
    }
}

/// Mark space with finite total intensity nu(U) and analytic moment weights of
/// the catalog jump shape zeta(z) = z:
/// `first_moment_weight` = \int zeta d nu, `second_moment_weight` = \int zeta^2 d nu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkSpaceSpec {
    pub total_intensity: f64,
    pub sampler: MarkSampler,
    pub first_moment_weight: f64,
    pub second_moment_weight: f64,
}

impl MarkSpaceSpec {
    pub fn new(total_intensity: f64, sampler: MarkSampler) -> Result<Self> {
        if !(total_intensity >= 0.0) || !total_intensity.is_finite() {
            return Err(Error::hypothesis(
                "H.6",
                format!("total intensity must be finite and >= 0, got {total_intensity}"),
            ));
        }
        sampler.validate()?;
        Ok(MarkSpaceSpec {
            total_intensity,
            sampler,
            first_moment_weight: total_intensity * sampler.mean(),
            second_moment_weight: total_intensity * sampler.second_moment(),
        })
    }
}

/// One sampled jump train: strictly increasing event times in (0, T] with marks.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrain {
    pub events: Vec<JumpEvent>,
    pub seed: u64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: f64,
}

/// Samples a train on (0, T]: Poisson(intensity T) events, times as sorted
/// uniform order statistics, i.i.d. marks. Deterministic per seed.
pub fn sample_jump_train(spec: &MarkSpaceSpec, horizon: f64, seed: u64) -> Result<JumpTrain> {
    sample_jump_train_indexed(spec, horizon, seed, 0)
}

/// Per-path variant used by the Monte Carlo layer: independent deterministic
/// streams per (seed, path_index).
pub fn sample_jump_train_indexed(
    spec: &MarkSpaceSpec,
    horizon: f64,
    seed: u64,
    path_index: u64,
) -> Result<JumpTrain> {
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let rate = spec.total_intensity * horizon;
    let mut events = Vec::new();
    if rate > 0.0 {
        let mut time_rng = substream(seed, StreamDomain::JumpTimes, path_index, 0);
        let mut mark_rng = substream(seed, StreamDomain::Marks, path_index, 0);
        let poisson = Poisson::new(rate)
            .map_err(|e| Error::numerical(format!("Poisson sampler: {e}")))?;
        let count = poisson.sample(&mut time_rng) as usize;
        let mut times: Vec<f64> = (0..count)
            .map(|_| horizon * (1.0 - time_rng.random::<f64>()))
            .collect();
        times.sort_by(f64::total_cmp);
        // Ties have probability zero; nudge if the draw degenerates.
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                times[i] = f64::from_bits(times[i - 1].to_bits() + 1);
            }
        }
        events = times
            .into_iter()
            .map(|time| JumpEvent {
                time,
                mark: spec.sampler.draw(&mut mark_rng),
            })
            .collect();
    }
    Ok(JumpTrain {
        events,
        seed,
        horizon,
    })
}

/// Compensated sum
/// sum_i weight(t_i) jump_coeff_i - \int_0^T weight(s) compensator_rate(s) ds,
/// the compensator integral evaluated with the solver's left-point grid rule.
pub fn compensated_sum(
    train: &JumpTrain,
    weight: impl Fn(f64) -> f64,
    jump_coeffs: &[f64],
    compensator_rate: impl Fn(f64) -> f64,
    grid: &TimeGrid,
) -> Result<f64> {
    if jump_coeffs.len() != train.events.len() {
        return Err(Error::domain(format!(
            "need one jump coefficient per event: {} vs {}",
            jump_coeffs.len(),
            train.events.len()
        )));
    }
    let mut acc = CompensatedSum::new();
    for (event, coeff) in train.events.iter().zip(jump_coeffs.iter()) {
        acc.add(weight(event.time) * coeff);
    }
    for j in 0..grid.n_steps() {
        let t = grid.node(j);
        acc.add(-weight(t) * compensator_rate(t) * grid.step());
    }
    Ok(acc.value())
}
