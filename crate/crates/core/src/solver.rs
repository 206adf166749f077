//! Mild-solution machinery on [-tau, T]: an exponential-Euler stepper with
//! exact per-mode semigroup weights, a whole-path fixed-point iterator over
//! the same quadratures, and Monte Carlo second-moment estimation.
//!
//! Scheme conventions:
//! - per-mode exponentials are exact, so the semigroup-only case has no
//!   discretization error at all;
//! - all stochastic integrands are frozen at the left node (predictable
//!   left limits at jump evaluations);
//! - jump times stay exact and are merged into the node set, never snapped,
//!   so semigroup weights at events are exact;
//! - fractional-noise increments live on the uniform grid; when an event
//!   splits a cell the whole increment enters at the first sub-step and the
//!   later transport reproduces the unsplit left-point weight exactly;
//! - delayed lookups between nodes use the previous node (right-continuous
//!   piecewise-constant interpolation), preserving cadlag semantics.

use crate::coefficients::{CoefficientSet, DelayKind, evaluate_delay};
use crate::error::{Error, Result};
use crate::fbm::HurstParameter;
use crate::grid::TimeGrid;
use crate::jumps::{sample_jump_train_indexed, JumpTrain, MarkSpaceSpec};
use crate::numeric::CompensatedSum;
use crate::spectral::{QCovariance, QfbmIncrements, QfbmSampler, SpectralModel};
use rayon::prelude::*;
use serde::Serialize;

/// Step size, horizon and iteration controls of the stepper and the
/// whole-path iterator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    grid: TimeGrid,
    /// Convergence tolerance of the implicit neutral sub-iteration.
    pub neutral_tol: f64,
    pub neutral_max_iter: usize,
    /// Node-wise tolerance of the whole-path fixed-point iteration.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl SolverConfig {
    pub fn new(step: f64, horizon: f64) -> Result<Self> {
        Ok(SolverConfig {
            grid: TimeGrid::from_horizon(step, horizon)?,
            neutral_tol: 1e-12,
            neutral_max_iter: 50,
            picard_tol: 1e-10,
            picard_max_iter: 50,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }
}

/// Deterministic initial datum on [-tau, 0].
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    Constant { vector: Vec<f64> },
    /// phi(t) = e^{kappa t} v for t in [-tau, 0].
    Exponential { kappa: f64, vector: Vec<f64> },
}

impl InitialDatum {
    pub fn dimension(&self) -> usize {
        match self {
            InitialDatum::Constant { vector } | InitialDatum::Exponential { vector, .. } => {
                vector.len()
            }
        }
    }

    pub fn value_at(&self, t: f64) -> Vec<f64> {
        match self {
            InitialDatum::Constant { vector } => vector.clone(),
            InitialDatum::Exponential { kappa, vector } => {
                let f = (kappa * t).exp();
                vector.iter().map(|v| f * v).collect()
            }
        }
    }

    /// Exact sup-norm squared over [-tau, 0].
    pub fn sup_norm_sq(&self, tau: f64) -> f64 {
        let base: f64 = match self {
            InitialDatum::Constant { vector } | InitialDatum::Exponential { vector, .. } => {
                vector.iter().map(|v| v * v).sum()
            }
        };
        match self {
            InitialDatum::Constant { .. } => base,
            InitialDatum::Exponential { kappa, .. } => {
                // sup of e^{2 kappa t} on [-tau, 0].
                base * (1.0f64).max((-2.0 * kappa * tau).exp())
            }
        }
    }
}

/// Per-path noise bundle: fractional increments per mode, the jump train and
/// the analytic compensator rate \int zeta d nu of the mark space.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub qfbm: QfbmIncrements,
    pub train: JumpTrain,
    pub mark_mean_rate: f64,
}

/// Factory for per-path realizations: the covariance factor is computed once
/// and shared; every path draws independent deterministic substreams.
#[derive(Debug, Clone)]
pub struct NoiseGenerator {
    sampler: QfbmSampler,
    marks: MarkSpaceSpec,
}

impl NoiseGenerator {
    pub fn new(
        q: &QCovariance,
        hurst: HurstParameter,
        grid: TimeGrid,
        marks: MarkSpaceSpec,
    ) -> Result<Self> {
        Ok(NoiseGenerator {
            sampler: QfbmSampler::new(q.clone(), hurst, grid)?,
            marks,
        })
    }

    pub fn realize(&self, seed: u64, path_index: u64) -> Result<NoiseRealization> {
        Ok(NoiseRealization {
            qfbm: self.sampler.sample(seed, path_index),
            train: sample_jump_train_indexed(
                &self.marks,
                self.sampler.grid().horizon(),
                seed,
                path_index,
            )?,
            mark_mean_rate: self.marks.first_moment_weight,
        })
    }
}

/// Solution path on [-tau, T]: grid nodes plus exact jump times, with the
/// right-continuous value at every node and the left limit stored at jump
/// nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryPath {
    times: Vec<f64>,
    values: Vec<f64>, // node-major, n_nodes x n_modes
    left_limits: Vec<Option<Vec<f64>>>,
    n_modes: usize,
    zero_index: usize,
    uniform_nodes: Vec<usize>,
    snap_eps: f64,
}

impl HistoryPath {
    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, node: usize) -> f64 {
        self.times[node]
    }

    pub fn state(&self, node: usize) -> &[f64] {
        &self.values[node * self.n_modes..(node + 1) * self.n_modes]
    }

    pub fn left_limit(&self, node: usize) -> &[f64] {
        match &self.left_limits[node] {
            Some(ll) => ll,
            None => self.state(node),
        }
    }

    /// True if a jump was applied at this node.
    pub fn is_jump_node(&self, node: usize) -> bool {
        self.left_limits[node].is_some()
    }

    /// Index of the node at time 0.
    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    /// Global node indices of the uniform grid nodes t_j, j = 0..n_steps.
    pub fn uniform_nodes(&self) -> &[usize] {
        &self.uniform_nodes
    }

    pub fn norm_sq(&self, node: usize) -> f64 {
        self.state(node).iter().map(|x| x * x).sum()
    }

    /// Rightmost node at or before q (snapping within one-billionth of a step).
    fn locate(&self, q: f64) -> Result<usize> {
        let count = self.times.partition_point(|t| *t <= q);
        if count == 0 {
            if self.times[0] - q <= self.snap_eps {
                return Ok(0);
            }
            return Err(Error::domain(format!(
                "delay lookup at t = {q} precedes the stored history start {}",
                self.times[0]
            )));
        }
        let mut idx = count - 1;
        if count < self.times.len() && self.times[count] - q <= self.snap_eps {
            idx = count;
        }
        Ok(idx)
    }

    /// Right-continuous lookup x(q).
    pub fn state_at(&self, q: f64) -> Result<&[f64]> {
        Ok(self.state(self.locate(q)?))
    }

    /// Left-limit lookup x(q-): differs from `state_at` only when q is a jump node.
    pub fn left_state_at(&self, q: f64) -> Result<&[f64]> {
        let idx = self.locate(q)?;
        if (self.times[idx] - q).abs() <= self.snap_eps {
            return Ok(self.left_limit(idx));
        }
        Ok(self.state(idx))
    }
}

/// Monte Carlo estimate of m(t) = E||x(t)||^2 on the uniform grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub times: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n_paths: usize,
}

// One merged node on [0, T].
#[derive(Debug, Clone)]
struct PosNode {
    time: f64,
    uniform_index: Option<usize>,
    events: std::ops::Range<usize>,
}

fn build_positive_nodes(grid: &TimeGrid, train: &JumpTrain) -> Vec<PosNode> {
    let events = &train.events;
    let mut nodes = Vec::with_capacity(grid.n_nodes() + events.len());
    let mut ev = 0usize;
    for j in 0..grid.n_nodes() {
        let t_u = grid.node(j);
        while ev < events.len() && events[ev].time < t_u {
            let t_e = events[ev].time;
            let start = ev;
            while ev < events.len() && events[ev].time == t_e {
                ev += 1;
            }
            nodes.push(PosNode {
                time: t_e,
                uniform_index: None,
                events: start..ev,
            });
        }
        let start = ev;
        while ev < events.len() && events[ev].time == t_u {
            ev += 1;
        }
        nodes.push(PosNode {
            time: t_u,
            uniform_index: Some(j),
            events: start..ev,
        });
    }
    nodes
}

fn negative_times(tau: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if tau > 0.0 {
        out.push(-tau);
        let k_max = (tau / step).floor() as usize;
        for k in (1..=k_max).rev() {
            let t = -(k as f64) * step;
            if t > -tau + 1e-12 * step {
                out.push(t);
            }
        }
    }
    out
}

// Shared per-run context for the stepper and the whole-path iterator.
struct RunContext<'a> {
    set: &'a CoefficientSet,
    noise: &'a NoiseRealization,
    cfg: &'a SolverConfig,
    mu_neg_beta: Vec<f64>,
    n_modes: usize,
    n_noise_modes: usize,
}

impl<'a> RunContext<'a> {
    fn new(
        model: &'a SpectralModel,
        q: &'a QCovariance,
        set: &'a CoefficientSet,
        datum: &'a InitialDatum,
        noise: &'a NoiseRealization,
        cfg: &'a SolverConfig,
    ) -> Result<Self> {
        set.validate(model, q)?;
        if datum.dimension() != model.dimension() {
            return Err(Error::domain(format!(
                "initial datum has {} modes, model dimension is {}",
                datum.dimension(),
                model.dimension()
            )));
        }
        if q.n_modes() > model.dimension() {
            return Err(Error::domain("noise modes exceed the model dimension"));
        }
        if noise.qfbm.n_modes() != q.n_modes() {
            return Err(Error::domain(format!(
                "noise realization has {} modes, Q has {}",
                noise.qfbm.n_modes(),
                q.n_modes()
            )));
        }
        if noise.qfbm.grid != *cfg.grid() {
            return Err(Error::domain(
                "noise realization was generated on a different grid",
            ));
        }
        let beta = set.beta;
        // Implicit neutral sub-steps contract iff K2 ||(-A)^{-beta}||^2 < 1.
        if let Some(k2) = set.neutral_gain.sup_sq() {
            let contraction = k2 * model.mu_min().powf(-2.0 * beta);
            if contraction >= 1.0 {
                return Err(Error::hypothesis(
                    "neutral contraction",
                    format!(
                        "K2 ||(-A)^-beta||^2 = {contraction} must be < 1 for the implicit neutral step"
                    ),
                ));
            }
        }
        let mu_neg_beta = model
            .eigenvalues()
            .iter()
            .map(|mu| mu.powf(-beta))
            .collect();
        Ok(RunContext {
            set,
            noise,
            cfg,
            mu_neg_beta,
            n_modes: model.dimension(),
            n_noise_modes: q.n_modes(),
        })
    }

    fn sigma_row(&self, t: f64) -> Vec<f64> {
        (0..self.n_noise_modes)
            .map(|n| self.set.sigma_coeff(t, n))
            .collect()
    }

    // Solves x = rest - gain(t_next) (-A)^{-beta} x_delayed for the new node.
    // Explicit when the delayed argument sits at or before the previous node;
    // fixed-point sub-iteration otherwise (this covers zero delay).
    fn solve_neutral(
        &self,
        path: &HistoryPath,
        rest: &[f64],
        t_prev: f64,
        t_next: f64,
    ) -> Result<Vec<f64>> {
        let gain = self.set.neutral_gain.value(t_next);
        if gain == 0.0 {
            return Ok(rest.to_vec());
        }
        let r = evaluate_delay(self.set, DelayKind::Neutral, t_next);
        let q_time = t_next - r;
        if q_time <= t_prev + path.snap_eps {
            // Delayed node already available: explicit evaluation.
            let delayed = path.state_at(q_time)?.to_vec();
            return Ok((0..self.n_modes)
                .map(|k| rest[k] - gain * self.mu_neg_beta[k] * delayed[k])
                .collect());
        }
        // Guard against a non-contractive gain at this node.
        let factor = gain.abs() * self.mu_neg_beta[0];
        if factor >= 1.0 {
            return Err(Error::solver(format!(
                "neutral sub-iteration cannot contract at t = {t_next}: |c_g| ||(-A)^-beta|| = {factor} >= 1"
            )));
        }
        let self_referencing = (q_time - t_next).abs() <= path.snap_eps;
        let mut cand = rest.to_vec();
        for _ in 0..self.cfg.neutral_max_iter {
            let next: Vec<f64> = if self_referencing {
                (0..self.n_modes)
                    .map(|k| rest[k] - gain * self.mu_neg_beta[k] * cand[k])
                    .collect()
            } else {
                let delayed = path.state_at(q_time)?.to_vec();
                (0..self.n_modes)
                    .map(|k| rest[k] - gain * self.mu_neg_beta[k] * delayed[k])
                    .collect()
            };
            let diff = next
                .iter()
                .zip(cand.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let scale = next.iter().map(|x| x.abs()).fold(1.0f64, f64::max);
            cand = next;
            if diff <= self.cfg.neutral_tol * scale {
                return Ok(cand);
            }
        }
        Err(Error::solver(format!(
            "neutral sub-iteration did not converge within {} iterations at node t = {t_next}",
            self.cfg.neutral_max_iter
        )))
    }

    // Jump increment applied at `t_next` for events `range`, evaluated on
    // predictable left-limit states. `fresh_left` is the just-computed left
    // limit at t_next, used when the jump delay vanishes.
    fn jump_increment(
        &self,
        path: &HistoryPath,
        range: &std::ops::Range<usize>,
        t_next: f64,
        fresh_left: &[f64],
    ) -> Result<Vec<f64>> {
        let mut inc = vec![0.0; self.n_modes];
        if range.is_empty() || self.set.jump_gain == 0.0 {
            return Ok(inc);
        }
        let theta = evaluate_delay(self.set, DelayKind::Jump, t_next);
        let q_time = t_next - theta;
        let delayed: Vec<f64> = if (q_time - t_next).abs() <= path.snap_eps {
            fresh_left.to_vec()
        } else {
            path.left_state_at(q_time)?.to_vec()
        };
        for ev in range.clone() {
            let mark = self.noise.train.events[ev].mark;
            for k in 0..self.n_modes {
                inc[k] += self.set.jump_gain * mark * delayed[k];
            }
        }
        Ok(inc)
    }
}

/// Advances the mild solution node to node over [-tau, T].
pub fn solve_path(
    model: &SpectralModel,
    q: &QCovariance,
    set: &CoefficientSet,
    datum: &InitialDatum,
    noise: &NoiseRealization,
    cfg: &SolverConfig,
) -> Result<HistoryPath> {
    let ctx = RunContext::new(model, q, set, datum, noise, cfg)?;
    let grid = cfg.grid();
    let pos = build_positive_nodes(grid, &noise.train);
    let neg = negative_times(set.tau, grid.step());
    let n_modes = ctx.n_modes;
    let n_nodes = neg.len() + pos.len();

    let mut path = HistoryPath {
        times: neg.iter().copied().chain(pos.iter().map(|n| n.time)).collect(),
        values: vec![0.0; n_nodes * n_modes],
        left_limits: vec![None; n_nodes],
        n_modes,
        zero_index: neg.len(),
        uniform_nodes: pos
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.uniform_index.map(|_| neg.len() + i))
            .collect(),
        snap_eps: 1e-9 * grid.step(),
    };

    // Initial segment: the datum exactly at nodes, including t = 0.
    for (i, t) in neg.iter().enumerate() {
        let v = datum.value_at(*t);
        path.values[i * n_modes..(i + 1) * n_modes].copy_from_slice(&v);
    }
    let phi0 = datum.value_at(0.0);
    let zi = path.zero_index;
    path.values[zi * n_modes..(zi + 1) * n_modes].copy_from_slice(&phi0);

    let mus = model.eigenvalues().to_vec();
    let mut rest = vec![0.0; n_modes];
    for i in 0..pos.len() - 1 {
        let node_prev = &pos[i];
        let node_next = &pos[i + 1];
        let t_prev = node_prev.time;
        let t_next = node_next.time;
        let delta = t_next - t_prev;
        let g_prev = zi + i;

        // Delayed arguments frozen at the left node.
        let r_prev = evaluate_delay(set, DelayKind::Neutral, t_prev);
        let x_r: Vec<f64> = path.state_at(t_prev - r_prev)?.to_vec();
        let rho_prev = evaluate_delay(set, DelayKind::Drift, t_prev);
        let x_rho: Vec<f64> = path.state_at(t_prev - rho_prev)?.to_vec();
        let theta_prev = evaluate_delay(set, DelayKind::Jump, t_prev);
        let x_theta: Vec<f64> = path.left_state_at(t_prev - theta_prev)?.to_vec();
        let x_prev: Vec<f64> = path.state(g_prev).to_vec();

        let gain_prev = set.neutral_gain.value(t_prev);
        let sigma_prev = ctx.sigma_row(t_prev);
        let comp_rate = set.jump_gain * noise.mark_mean_rate;

        for k in 0..n_modes {
            let mu = mus[k];
            let e_delta = (-mu * delta).exp();
            let one_minus = -(-mu * delta).exp_m1();
            let g_k = gain_prev * ctx.mu_neg_beta[k] * x_r[k];
            let f_k = set.drift_gains[k] * x_rho[k];
            let comp_k = comp_rate * x_theta[k];
            let mut acc = e_delta * (x_prev[k] + g_k);
            acc += g_k * one_minus;
            acc += f_k * one_minus / mu;
            acc -= comp_k * one_minus / mu;
            if k < ctx.n_noise_modes {
                if let Some(j) = node_prev.uniform_index {
                    if j < grid.n_steps() {
                        acc += e_delta * sigma_prev[k] * noise.qfbm.per_mode[k][j];
                    }
                }
            }
            rest[k] = acc;
        }

        let left_limit = ctx.solve_neutral(&path, &rest, t_prev, t_next)?;
        let g_next = g_prev + 1;
        if node_next.events.is_empty() {
            path.values[g_next * n_modes..(g_next + 1) * n_modes].copy_from_slice(&left_limit);
        } else {
            let inc = ctx.jump_increment(&path, &node_next.events, t_next, &left_limit)?;
            let rest_jumped: Vec<f64> = rest.iter().zip(inc.iter()).map(|(r, i)| r + i).collect();
            let value = ctx.solve_neutral(&path, &rest_jumped, t_prev, t_next)?;
            path.values[g_next * n_modes..(g_next + 1) * n_modes].copy_from_slice(&value);
            path.left_limits[g_next] = Some(left_limit);
        }
    }
    Ok(path)
}

/// Builds the canonical starting iterate for the whole-path iteration: the
/// datum on [-tau, 0], extended by the constant phi(0) on (0, T], on the node
/// set induced by this noise realization.
pub fn initial_iterate(
    set: &CoefficientSet,
    datum: &InitialDatum,
    noise: &NoiseRealization,
    cfg: &SolverConfig,
) -> Result<HistoryPath> {
    let grid = cfg.grid();
    if noise.qfbm.grid != *grid {
        return Err(Error::domain(
            "noise realization was generated on a different grid",
        ));
    }
    let pos = build_positive_nodes(grid, &noise.train);
    let neg = negative_times(set.tau, grid.step());
    let n_modes = datum.dimension();
    let n_nodes = neg.len() + pos.len();
    let mut path = HistoryPath {
        times: neg.iter().copied().chain(pos.iter().map(|n| n.time)).collect(),
        values: vec![0.0; n_nodes * n_modes],
        left_limits: vec![None; n_nodes],
        n_modes,
        zero_index: neg.len(),
        uniform_nodes: pos
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.uniform_index.map(|_| neg.len() + i))
            .collect(),
        snap_eps: 1e-9 * grid.step(),
    };
    for (i, t) in neg.iter().enumerate() {
        let v = datum.value_at(*t);
        path.values[i * n_modes..(i + 1) * n_modes].copy_from_slice(&v);
    }
    let phi0 = datum.value_at(0.0);
    for i in path.zero_index..n_nodes {
        path.values[i * n_modes..(i + 1) * n_modes].copy_from_slice(&phi0);
    }
    Ok(path)
}

/// One application of the whole-path map: every term of the mild formula is
/// evaluated at every node against `current`, with anchored-at-zero
/// quadratures (left-point stochastic sums, exact per-mode exponential
/// weights). Returns the new path; equals the datum on [-tau, 0].
pub fn picard_apply(
    model: &SpectralModel,
    q: &QCovariance,
    set: &CoefficientSet,
    datum: &InitialDatum,
    noise: &NoiseRealization,
    current: &HistoryPath,
    cfg: &SolverConfig,
) -> Result<HistoryPath> {
    let ctx = RunContext::new(model, q, set, datum, noise, cfg)?;
    let grid = cfg.grid();
    let pos = build_positive_nodes(grid, &noise.train);
    let neg = negative_times(set.tau, grid.step());
    let n_modes = ctx.n_modes;
    let n_nodes = neg.len() + pos.len();
    let expected_times: Vec<f64> = neg.iter().copied().chain(pos.iter().map(|n| n.time)).collect();
    if current.times != expected_times || current.n_modes != n_modes {
        return Err(Error::domain(
            "current path does not match this noise realization and grid",
        ));
    }

    let mut path = HistoryPath {
        times: expected_times,
        values: vec![0.0; n_nodes * n_modes],
        left_limits: vec![None; n_nodes],
        n_modes,
        zero_index: neg.len(),
        uniform_nodes: current.uniform_nodes.clone(),
        snap_eps: current.snap_eps,
    };

    for (i, t) in neg.iter().enumerate() {
        let v = datum.value_at(*t);
        path.values[i * n_modes..(i + 1) * n_modes].copy_from_slice(&v);
    }
    let phi0 = datum.value_at(0.0);
    let zi = path.zero_index;
    path.values[zi * n_modes..(zi + 1) * n_modes].copy_from_slice(&phi0);

    let mus = model.eigenvalues().to_vec();
    let r0 = evaluate_delay(set, DelayKind::Neutral, 0.0);
    let phi_r0 = datum.value_at(-r0);
    let gain0 = set.neutral_gain.value(0.0);
    let comp_rate = set.jump_gain * noise.mark_mean_rate;

    // Per-cell data, frozen at left nodes of `current`.
    let n_pos = pos.len();
    let mut cell_g = vec![0.0; (n_pos - 1) * n_modes];
    let mut cell_f = vec![0.0; (n_pos - 1) * n_modes];
    let mut cell_comp = vec![0.0; (n_pos - 1) * n_modes];
    let mut cell_sigma = vec![0.0; (n_pos - 1) * n_modes];
    for j in 0..n_pos - 1 {
        let t_j = pos[j].time;
        let r_j = evaluate_delay(set, DelayKind::Neutral, t_j);
        let x_r = current.state_at(t_j - r_j)?;
        let rho_j = evaluate_delay(set, DelayKind::Drift, t_j);
        let x_rho = current.state_at(t_j - rho_j)?;
        let theta_j = evaluate_delay(set, DelayKind::Jump, t_j);
        let x_theta = current.left_state_at(t_j - theta_j)?;
        let gain_j = set.neutral_gain.value(t_j);
        let sigma_j = ctx.sigma_row(t_j);
        for k in 0..n_modes {
            cell_g[j * n_modes + k] = gain_j * ctx.mu_neg_beta[k] * x_r[k];
            cell_f[j * n_modes + k] = set.drift_gains[k] * x_rho[k];
            cell_comp[j * n_modes + k] = comp_rate * x_theta[k];
            if k < ctx.n_noise_modes {
                cell_sigma[j * n_modes + k] = sigma_j[k];
            }
        }
    }
    // Jump effects at their nodes, from predictable left-limit states of `current`.
    let mut node_jump = vec![0.0; n_pos * n_modes];
    for (i, node) in pos.iter().enumerate() {
        if node.events.is_empty() || set.jump_gain == 0.0 {
            continue;
        }
        let theta = evaluate_delay(set, DelayKind::Jump, node.time);
        let x_theta = current.left_state_at(node.time - theta)?;
        for ev in node.events.clone() {
            let mark = noise.train.events[ev].mark;
            for k in 0..n_modes {
                node_jump[i * n_modes + k] += set.jump_gain * mark * x_theta[k];
            }
        }
    }

    for m in 1..n_pos {
        let t_m = pos[m].time;
        let g_m = zi + m;
        let r_m = evaluate_delay(set, DelayKind::Neutral, t_m);
        let q_time = t_m - r_m;
        let gain_m = set.neutral_gain.value(t_m);
        let x_r_value = current.state_at(q_time)?.to_vec();
        let x_r_left = current.left_state_at(q_time)?.to_vec();

        for k in 0..n_modes {
            let mu = mus[k];
            let mut acc = CompensatedSum::new();
            // Semigroup-transported neutral-adjusted initial value.
            acc.add((-mu * t_m).exp() * (phi0[k] + gain0 * ctx.mu_neg_beta[k] * phi_r0[k]));
            for j in 0..m {
                let t_j = pos[j].time;
                let t_j1 = pos[j + 1].time;
                let decay_weight = (-mu * (t_m - t_j1)).exp() * (-(-mu * (t_j1 - t_j)).exp_m1());
                acc.add(cell_g[j * n_modes + k] * decay_weight);
                acc.add(cell_f[j * n_modes + k] * decay_weight / mu);
                acc.add(-cell_comp[j * n_modes + k] * decay_weight / mu);
                if k < ctx.n_noise_modes {
                    if let Some(u) = pos[j].uniform_index {
                        if u < grid.n_steps() {
                            acc.add(
                                (-mu * (t_m - t_j)).exp()
                                    * cell_sigma[j * n_modes + k]
                                    * noise.qfbm.per_mode[k][u],
                            );
                        }
                    }
                }
                // Events attached to node j+1 arrive with exact weights.
                if node_jump[(j + 1) * n_modes + k] != 0.0 {
                    acc.add((-mu * (t_m - t_j1)).exp() * node_jump[(j + 1) * n_modes + k]);
                }
            }
            let common = acc.value();
            let value = common - gain_m * ctx.mu_neg_beta[k] * x_r_value[k];
            path.values[g_m * n_modes + k] = value;
            if !pos[m].events.is_empty() {
                let left = common
                    - node_jump[m * n_modes + k]
                    - gain_m * ctx.mu_neg_beta[k] * x_r_left[k];
                match &mut path.left_limits[g_m] {
                    Some(ll) => ll[k] = left,
                    None => {
                        let mut ll = vec![0.0; n_modes];
                        ll[k] = left;
                        path.left_limits[g_m] = Some(ll);
                    }
                }
            }
        }
    }
    Ok(path)
}

/// A complete experiment: model, noise law, coefficients, datum and solver
/// configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: SpectralModel,
    pub q: QCovariance,
    pub hurst: HurstParameter,
    pub marks: MarkSpaceSpec,
    pub set: CoefficientSet,
    pub datum: InitialDatum,
    pub cfg: SolverConfig,
}

impl Experiment {
    pub fn new(
        model: SpectralModel,
        q: QCovariance,
        hurst: HurstParameter,
        marks: MarkSpaceSpec,
        set: CoefficientSet,
        datum: InitialDatum,
        cfg: SolverConfig,
    ) -> Result<Self> {
        set.validate(&model, &q)?;
        if datum.dimension() != model.dimension() {
            return Err(Error::config(format!(
                "field initial.vector: expected {} entries (model dimension), got {}",
                model.dimension(),
                datum.dimension()
            )));
        }
        if q.n_modes() > model.dimension() {
            return Err(Error::config(format!(
                "field model.q_eigenvalues: {} noise modes exceed the model dimension {}",
                q.n_modes(),
                model.dimension()
            )));
        }
        Ok(Experiment {
            model,
            q,
            hurst,
            marks,
            set,
            datum,
            cfg,
        })
    }

    pub fn noise_generator(&self) -> Result<NoiseGenerator> {
        NoiseGenerator::new(&self.q, self.hurst, *self.cfg.grid(), self.marks)
    }

    pub fn solve_realized(&self, noise: &NoiseRealization) -> Result<HistoryPath> {
        solve_path(&self.model, &self.q, &self.set, &self.datum, noise, &self.cfg)
    }

    pub fn solve_one(&self, seed: u64, path_index: u64) -> Result<HistoryPath> {
        let gen = self.noise_generator()?;
        self.solve_realized(&gen.realize(seed, path_index)?)
    }

    /// Per-node mean of ||x(t_j)||^2 with its standard error, over independent
    /// realizations. Paths run in parallel in fixed-size blocks and blocks are
    /// reduced in index order with compensated sums, so the result is
    /// bit-identical for any thread count.
    pub fn monte_carlo_moments(&self, n_paths: usize, seed: u64) -> Result<MomentTable> {
        if n_paths == 0 {
            return Err(Error::domain("n_paths must be at least 1"));
        }
        const BLOCK: usize = 64;
        let gen = self.noise_generator()?;
        let grid = self.cfg.grid();
        let n_nodes = grid.n_nodes();
        let n_blocks = n_paths.div_ceil(BLOCK);
        let partials: Vec<(Vec<CompensatedSum>, Vec<CompensatedSum>)> = (0..n_blocks)
            .into_par_iter()
            .map(|b| -> Result<(Vec<CompensatedSum>, Vec<CompensatedSum>)> {
                let mut s = vec![CompensatedSum::new(); n_nodes];
                let mut s2 = vec![CompensatedSum::new(); n_nodes];
                let lo = b * BLOCK;
                let hi = ((b + 1) * BLOCK).min(n_paths);
                for p in lo..hi {
                    let noise = gen.realize(seed, p as u64)?;
                    let path = self.solve_realized(&noise)?;
                    for (j, gidx) in path.uniform_nodes().iter().enumerate() {
                        let nsq = path.norm_sq(*gidx);
                        s[j].add(nsq);
                        s2[j].add(nsq * nsq);
                    }
                }
                Ok((s, s2))
            })
            .collect::<Result<Vec<_>>>()?;

        let n = n_paths as f64;
        let mut mean_sq = Vec::with_capacity(n_nodes);
        let mut std_err = Vec::with_capacity(n_nodes);
        for j in 0..n_nodes {
            let mut sum = CompensatedSum::new();
            let mut sum_sq = CompensatedSum::new();
            for (s, s2) in &partials {
                sum.add(s[j].value());
                sum_sq.add(s2[j].value());
            }
            let mean = sum.value() / n;
            let var = if n_paths > 1 {
                ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            mean_sq.push(mean);
            std_err.push((var / n).sqrt());
        }
        Ok(MomentTable {
            times: grid.nodes().collect(),
            mean_sq,
            std_err,
            n_paths,
        })
    }
}
