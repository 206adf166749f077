//! JSON experiment configuration: schema, validation against the standing
//! model hypotheses, and construction of the domain objects.

use crate::coefficients::{CoefficientSet, DelaySpec, DelayTriple, GainProfile};
use crate::error::{Error, Result};
use crate::fbm::HurstParameter;
use crate::jumps::{MarkSampler, MarkSpaceSpec};
use crate::solver::{Experiment, InitialDatum, SolverConfig};
use crate::spectral::{QCovariance, SpectralModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub jumps: JumpSection,
    pub coefficients: CoefficientSection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub monte_carlo: MonteCarloSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub eigenvalues: Vec<f64>,
    pub q_eigenvalues: Vec<f64>,
    pub hurst: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSection {
    pub jump_intensity: f64,
    pub mark_sampler: MarkSampler,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    pub drift_gains: Vec<f64>,
    pub neutral_gain: f64,
    pub beta: f64,
    pub sigma0: f64,
    pub sigma_decay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_diag: Option<Vec<f64>>,
    pub jump_gain: f64,
    pub delays: DelaysSection,
    pub tau: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaysSection {
    pub r: DelaySpec,
    pub rho: DelaySpec,
    pub theta: DelaySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    Constant { vector: Vec<f64> },
    Exponential { kappa: f64, vector: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub step: f64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neutral_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neutral_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_max_iter: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
}

/// Embedded oracle used by the shipped presets and the self-test runner.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSection {
    /// Fitted decay rate of the moment table must match `expected`.
    DecayRate { expected: f64, rel_tol: f64 },
    /// m(time) must match `expected` within a relative tolerance.
    TerminalMeanSq { time: f64, expected: f64, rel_tol: f64 },
    /// m(time) must match `expected` within se_multiplier standard errors
    /// plus a relative discretization budget.
    MomentVsConstant {
        time: f64,
        expected: f64,
        se_multiplier: f64,
        rel_budget: f64,
    },
    /// m(t) must follow m(0) e^{rate t} at the probe times, within
    /// se_multiplier standard errors plus a relative budget.
    MomentOde {
        rate: f64,
        times: Vec<f64>,
        se_multiplier: f64,
        rel_budget: f64,
    },
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::config(format!("config schema: {e}")))
    }

    /// Validates every standing hypothesis and builds the runnable experiment.
    pub fn build(&self) -> Result<Experiment> {
        let hurst = HurstParameter::new(self.model.hurst)?;
        let model = SpectralModel::new(self.model.eigenvalues.clone())?;
        let q = QCovariance::new(self.model.q_eigenvalues.clone())
            .map_err(|e| Error::config(format!("field model.q_eigenvalues: {e}")))?;
        let marks = MarkSpaceSpec::new(self.jumps.jump_intensity, self.jumps.mark_sampler)?;
        let c = &self.coefficients;
        let set = CoefficientSet {
            drift_gains: c.drift_gains.clone(),
            neutral_gain: GainProfile::constant(c.neutral_gain),
            beta: c.beta,
            sigma0: c.sigma0,
            sigma_decay: c.sigma_decay,
            sigma_diag: c
                .sigma_diag
                .clone()
                .unwrap_or_else(|| vec![1.0; q.n_modes()]),
            jump_gain: c.jump_gain,
            delays: DelayTriple {
                r: c.delays.r,
                rho: c.delays.rho,
                theta: c.delays.theta,
            },
            tau: c.tau,
        };
        set.validate(&model, &q)?;
        let datum = match &self.initial {
            InitialSection::Constant { vector } => InitialDatum::Constant {
                vector: vector.clone(),
            },
            InitialSection::Exponential { kappa, vector } => InitialDatum::Exponential {
                kappa: *kappa,
                vector: vector.clone(),
            },
        };
        let s = &self.solver;
        let mut cfg = SolverConfig::new(s.step, s.horizon)
            .map_err(|e| Error::config(format!("field solver: {e}")))?;
        if let Some(v) = s.neutral_tol {
            cfg.neutral_tol = v;
        }
        if let Some(v) = s.neutral_max_iter {
            cfg.neutral_max_iter = v;
        }
        if let Some(v) = s.picard_tol {
            cfg.picard_tol = v;
        }
        if let Some(v) = s.picard_max_iter {
            cfg.picard_max_iter = v;
        }
        if self.monte_carlo.n_paths == 0 {
            return Err(Error::config(
                "field monte_carlo.n_paths: must be at least 1",
            ));
        }
        Experiment::new(model, q, hurst, marks, set, datum, cfg)
    }
}
