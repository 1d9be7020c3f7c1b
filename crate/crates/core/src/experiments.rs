//! Synthetic separation and robust compressive-sensing experiments.
//!
//! Every trial draws its operators, signals and noise from a seed derived
//! from `(base_seed, K, trial)`, so tables are reproducible and extending
//! the trial count leaves earlier rows untouched.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linops::{LinearOperator, LinopError, OperatorKind};
use crate::solvers::{self, sadmm_solve, DemixProblem, SolveResult, SolverConfig, SolverError, SolverKind};

/// Recovery counts as a success when `RelErr(x₁) ≤ SUCCESS_RELERR`.
pub const SUCCESS_RELERR: f64 = 1e-2;
/// Iteration cap of the convex S-ADMM warm start.
pub const WARM_START_ITERS: usize = 1000;
/// Default trials per point at desk scale.
pub const DEFAULT_TRIALS: usize = 50;
/// Floor applied before converting a RelErr to dB.
pub const DB_FLOOR: f64 = 1e-16;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment parameter `{field}`: {message}")]
    InvalidParam { field: &'static str, message: String },
    #[error("relative error undefined for an all-zero reference")]
    ZeroTruth,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

fn invalid(field: &'static str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::InvalidParam { field, message: message.into() }
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sparsity `k`: `mix(mix(mix(base) ^ k) ^ trial)`.
pub fn trial_seed(base_seed: u64, k: usize, trial: usize) -> u64 {
    mix64(mix64(mix64(base_seed) ^ k as u64) ^ trial as u64)
}

/// Independent sub-stream `tag` of a trial seed.
pub fn substream(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// `k` standard-normal entries at a uniformly random support of size `k`.
pub fn generate_sparse_signal(n: usize, k: usize, seed: u64) -> Result<Array1<f64>> {
    if k > n {
        return Err(invalid("sparsity_k", format!("K = {k} exceeds length {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array1::zeros(n);
    for idx in sample(&mut rng, n, k).into_iter() {
        // A draw of exactly 0.0 would shrink the support.
        let v = loop {
            let v: f64 = StandardNormal.sample(&mut rng);
            if v != 0.0 {
                break v;
            }
        };
        x[idx] = v;
    }
    Ok(x)
}

/// `n` i.i.d. symmetric α-stable samples with characteristic function
/// `exp(−γ^α |ω|^α)`, by the Chambers–Mallows–Stuck transform. `α = 1` uses
/// the Cauchy closed form `γ tan(π(u − ½))`.
pub fn sas_noise(n: usize, alpha: f64, gamma: f64, seed: u64) -> Result<Array1<f64>> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid("alpha", format!("must lie in (0, 2], got {alpha}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let out = (0..n)
        .map(|_| {
            if alpha == 1.0 {
                let u: f64 = open_unit(&mut rng);
                return gamma * (std::f64::consts::PI * (u - 0.5)).tan();
            }
            let v = half_pi * (2.0 * open_unit(&mut rng) - 1.0);
            let w: f64 = Exp1.sample(&mut rng);
            let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
            let b = ((v - alpha * v).cos() / w).powf((1.0 - alpha) / alpha);
            gamma * a * b
        })
        .collect();
    Ok(out)
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `‖estimate − truth‖_F / ‖truth‖_F`.
pub fn relerr<D: ndarray::Dimension>(
    estimate: &ndarray::Array<f64, D>,
    truth: &ndarray::Array<f64, D>,
) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(ExperimentError::Shape(format!("{:?} vs {:?}", estimate.shape(), truth.shape())));
    }
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ExperimentError::ZeroTruth);
    }
    let diff = estimate.iter().zip(truth.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(diff / norm)
}

/// `20 log₁₀(relerr)`, floored at [`DB_FLOOR`].
pub fn relerr_db(r: f64) -> f64 {
    20.0 * r.max(DB_FLOOR).log10()
}

/// The μ with the lowest RelErr; ties go to the larger μ.
pub fn select_mu(candidates: &[f64], relerrs: &[f64]) -> Result<f64> {
    if candidates.is_empty() || candidates.len() != relerrs.len() {
        return Err(invalid("mu_grid", "needs one RelErr per candidate and at least one candidate"));
    }
    let mut best = 0;
    for i in 1..candidates.len() {
        let (r, b) = (relerrs[i], relerrs[best]);
        let better = r < b || (r == b && candidates[i] > candidates[best]) || (b.is_nan() && !r.is_nan());
        if better {
            best = i;
        }
    }
    Ok(candidates[best])
}

/// Thirteen log-spaced μ values from `10⁻²` to `10²`.
pub fn default_mu_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-2.0 + i as f64 / 3.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `x₂` is `K`-sparse like `x₁`.
    None,
    /// `x₂` is dense symmetric α-stable noise.
    Sas { alpha: f64, gamma: f64 },
}

/// Parameters of a synthetic demixing instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub sparsity_k: usize,
    pub a1_kind: OperatorKind,
    pub a2_kind: OperatorKind,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Sparse separation setup: 128-point DCT and orthonormal Gaussian.
    pub fn separation(k: usize, seed: u64) -> Self {
        SyntheticSpec {
            m: 128,
            n1: 128,
            n2: 128,
            sparsity_k: k,
            a1_kind: OperatorKind::Dct,
            a2_kind: OperatorKind::GaussianOrthonormal,
            noise: NoiseModel::None,
            seed,
        }
    }

    /// Robust compressive sensing: `100 × 256` orthonormal Gaussian sensing,
    /// identity for the noise, Cauchy noise with scale `10⁻³`.
    pub fn robust_cs(k: usize, seed: u64) -> Self {
        SyntheticSpec {
            m: 100,
            n1: 256,
            n2: 100,
            sparsity_k: k,
            a1_kind: OperatorKind::GaussianOrthonormal,
            a2_kind: OperatorKind::Identity,
            noise: NoiseModel::Sas { alpha: 1.0, gamma: 1e-3 },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n1 == 0 || self.n2 == 0 {
            return Err(invalid("m", "dimensions must be positive"));
        }
        if self.sparsity_k > self.n1 {
            return Err(invalid("sparsity_k", format!("K = {} exceeds n1 = {}", self.sparsity_k, self.n1)));
        }
        if matches!(self.noise, NoiseModel::None) && self.sparsity_k > self.n2 {
            return Err(invalid("sparsity_k", format!("K = {} exceeds n2 = {}", self.sparsity_k, self.n2)));
        }
        Ok(())
    }

    pub fn with_k(&self, k: usize) -> Self {
        SyntheticSpec { sparsity_k: k, ..self.clone() }
    }
}

/// A generated instance with its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: DemixProblem,
    pub x1: Array1<f64>,
    pub x2: Array1<f64>,
    pub seed: u64,
}

/// Draws one instance from `spec` using `seed` for every random component.
pub fn generate_instance(spec: &SyntheticSpec, seed: u64) -> Result<Instance> {
    spec.validate()?;
    let a1 = LinearOperator::of_kind(spec.a1_kind, spec.m, spec.n1, substream(seed, 1))?;
    let a2 = LinearOperator::of_kind(spec.a2_kind, spec.m, spec.n2, substream(seed, 2))?;
    let x1 = generate_sparse_signal(spec.n1, spec.sparsity_k, substream(seed, 3))?;
    let x2 = match spec.noise {
        NoiseModel::None => generate_sparse_signal(spec.n2, spec.sparsity_k, substream(seed, 4))?,
        NoiseModel::Sas { alpha, gamma } => sas_noise(spec.n2, alpha, gamma, substream(seed, 4))?,
    };
    let y = a1.apply(x1.view())? + a2.apply(x2.view())?;
    let problem = DemixProblem::single(a1, a2, y)?;
    Ok(Instance { problem, x1, x2, seed })
}

fn needs_warm_start(cfg: &SolverConfig) -> bool {
    cfg.q1 < 1.0 || cfg.q2 < 1.0
}

/// Convex S-ADMM initialization (`q₁ = q₂ = 1`, `μ = 1`) for nonconvex
/// configurations, run per channel. `None` for convex configurations.
pub fn warm_start(p: &DemixProblem, cfg: &SolverConfig) -> Result<Option<(Array2<f64>, Array2<f64>)>> {
    if !needs_warm_start(cfg) {
        return Ok(None);
    }
    let convex = SolverConfig { q1: 1.0, q2: 1.0, mu: 1.0, max_iters: WARM_START_ITERS.min(cfg.max_iters), ..cfg.clone() };
    let l = p.channels();
    let mut x1 = Array2::zeros((p.a1().cols(), l));
    let mut x2 = Array2::zeros((p.a2().cols(), l));
    for c in 0..l {
        let single = DemixProblem::single(p.a1().clone(), p.a2().clone(), p.y().column(c).to_owned())?;
        let r = sadmm_solve(&single, &convex, None)?;
        x1.column_mut(c).assign(&r.x1.column(0));
        x2.column_mut(c).assign(&r.x2.column(0));
    }
    Ok(Some((x1, x2)))
}

/// Warm start (when the configuration is nonconvex) followed by the solve.
pub fn solve_with_protocol(kind: SolverKind, p: &DemixProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    let init = if kind == SolverKind::Sadmm && !needs_warm_start(cfg) { None } else { warm_start(p, cfg)? };
    Ok(solvers::solve(kind, p, cfg, init)?)
}

/// One row of a phase-transition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub k: usize,
    pub trial: usize,
    pub seed: u64,
    pub mu: f64,
    pub relerr_x1: f64,
    pub success: bool,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds; excluded from CSV output so tables stay reproducible.
    pub wall_time: f64,
    /// Solver error message when the trial failed outright.
    pub error: Option<String>,
}

impl TrialOutcome {
    fn failed(k: usize, trial: usize, seed: u64, mu: f64, err: &ExperimentError, wall_time: f64) -> Self {
        TrialOutcome {
            k,
            trial,
            seed,
            mu,
            relerr_x1: f64::INFINITY,
            success: false,
            iterations: 0,
            converged: false,
            wall_time,
            error: Some(err.to_string()),
        }
    }
}

/// Runs one seeded trial; solver failures become failed outcomes.
pub fn run_trial(spec: &SyntheticSpec, kind: SolverKind, cfg: &SolverConfig, trial: usize) -> TrialOutcome {
    let k = spec.sparsity_k;
    let seed = trial_seed(spec.seed, k, trial);
    let start = Instant::now();
    let attempt = || -> Result<(f64, usize, bool)> {
        let inst = generate_instance(spec, seed)?;
        if inst.x1.iter().all(|&v| v == 0.0) {
            // K = 0: the zero signal is recovered by the zero fixed point.
            let r = solve_with_protocol(kind, &inst.problem, cfg)?;
            let err = r.x1.iter().map(|v| v * v).sum::<f64>().sqrt();
            return Ok((err, r.iterations, r.converged));
        }
        let r = solve_with_protocol(kind, &inst.problem, cfg)?;
        Ok((relerr(&r.x1.column(0).to_owned(), &inst.x1)?, r.iterations, r.converged))
    };
    match attempt() {
        Ok((relerr_x1, iterations, converged)) => TrialOutcome {
            k,
            trial,
            seed,
            mu: cfg.mu,
            relerr_x1,
            success: relerr_x1 <= SUCCESS_RELERR,
            iterations,
            converged,
            wall_time: start.elapsed().as_secs_f64(),
            error: None,
        },
        Err(e) => TrialOutcome::failed(k, trial, seed, cfg.mu, &e, start.elapsed().as_secs_f64()),
    }
}

/// Runs `trials` seeded trials; output order is by trial index.
pub fn run_trials(spec: &SyntheticSpec, kind: SolverKind, cfg: &SolverConfig, trials: usize) -> Vec<TrialOutcome> {
    (0..trials).into_par_iter().map(|t| run_trial(spec, kind, cfg, t)).collect()
}

/// Mean of `20 log₁₀ RelErr` over trials.
pub fn mean_relerr_db(outcomes: &[TrialOutcome]) -> f64 {
    outcomes.iter().map(|o| relerr_db(o.relerr_x1)).sum::<f64>() / outcomes.len() as f64
}

pub fn success_rate(outcomes: &[TrialOutcome]) -> f64 {
    outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64
}

/// Trials at a fixed μ. With a non-empty `mu_grid`, trials at the grid
/// value with the lowest mean RelErr (dB).
pub fn run_trials_best_mu(
    spec: &SyntheticSpec,
    kind: SolverKind,
    cfg: &SolverConfig,
    trials: usize,
    mu_grid: &[f64],
) -> Result<Vec<TrialOutcome>> {
    if mu_grid.is_empty() {
        return Ok(run_trials(spec, kind, cfg, trials));
    }
    let runs: Vec<Vec<TrialOutcome>> =
        mu_grid.iter().map(|&mu| run_trials(spec, kind, &cfg.clone().with_mu(mu), trials)).collect();
    let scores: Vec<f64> = runs.iter().map(|r| mean_relerr_db(r)).collect();
    let best = select_mu(mu_grid, &scores)?;
    let idx = mu_grid.iter().position(|&m| m == best).expect("selected from grid");
    Ok(runs.into_iter().nth(idx).expect("index in range"))
}

/// Success rates versus sparsity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub solver: SolverKind,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub success_rate: Vec<f64>,
    pub outcomes: Vec<TrialOutcome>,
}

impl PhaseReport {
    /// One row per `(K, trial)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,trial,seed,mu,relerr_x1,success,iterations,converged\n");
        for o in &self.outcomes {
            s.push_str(&format!(
                "{},{},{},{},{:e},{},{},{}\n",
                o.k, o.trial, o.seed, o.mu, o.relerr_x1, o.success as u8, o.iterations, o.converged as u8
            ));
        }
        s
    }

    /// Plot-ready `k,success_rate`.
    pub fn rates_csv(&self) -> String {
        let mut s = format!("k,{}\n", self.solver);
        for (k, r) in self.k_values.iter().zip(&self.success_rate) {
            s.push_str(&format!("{k},{r}\n"));
        }
        s
    }
}

/// Success rate per sparsity level.
pub fn run_phase_transition(
    spec: &SyntheticSpec,
    kind: SolverKind,
    cfg: &SolverConfig,
    k_values: &[usize],
    trials: usize,
    mu_grid: &[f64],
) -> Result<PhaseReport> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    cfg.validate()?;
    let mut outcomes = Vec::new();
    let mut success_rate = Vec::new();
    for &k in k_values {
        let spec_k = spec.with_k(k);
        spec_k.validate()?;
        let rows = run_trials_best_mu(&spec_k, kind, cfg, trials, mu_grid)?;
        success_rate.push(self::success_rate(&rows));
        outcomes.extend(rows);
    }
    Ok(PhaseReport { solver: kind, k_values: k_values.to_vec(), trials, success_rate, outcomes })
}

/// Mean RelErr (dB) and success rate over a `(q₁, q₂)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub solver: SolverKind,
    pub q1_values: Vec<f64>,
    pub q2_values: Vec<f64>,
    /// `mean_relerr_db[i][j]` is the cell `(q1_values[i], q2_values[j])`.
    pub mean_relerr_db: Vec<Vec<f64>>,
    pub success_rate: Vec<Vec<f64>>,
    pub chosen_mu: Vec<Vec<f64>>,
    pub trials_per_cell: usize,
    pub spec: SyntheticSpec,
    pub config: SolverConfig,
}

impl GridReport {
    /// One row per grid cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("q1,q2,mu,mean_relerr_db,success_rate\n");
        for (i, q1) in self.q1_values.iter().enumerate() {
            for (j, q2) in self.q2_values.iter().enumerate() {
                s.push_str(&format!(
                    "{q1},{q2},{},{},{}\n",
                    self.chosen_mu[i][j], self.mean_relerr_db[i][j], self.success_rate[i][j]
                ));
            }
        }
        s
    }

    /// Cell with the lowest mean RelErr (dB): `(q1, q2, value)`.
    pub fn best_cell(&self) -> (f64, f64, f64) {
        let mut best = (self.q1_values[0], self.q2_values[0], f64::INFINITY);
        for (i, &q1) in self.q1_values.iter().enumerate() {
            for (j, &q2) in self.q2_values.iter().enumerate() {
                let v = self.mean_relerr_db[i][j];
                if v < best.2 {
                    best = (q1, q2, v);
                }
            }
        }
        best
    }
}

/// Recovery quality over the `(q₁, q₂)` grid. Every cell sees the same
/// seeded instances.
pub fn run_q_grid(
    spec: &SyntheticSpec,
    kind: SolverKind,
    template: &SolverConfig,
    q1_values: &[f64],
    q2_values: &[f64],
    trials: usize,
    mu_grid: &[f64],
) -> Result<GridReport> {
    if q1_values.is_empty() || q2_values.is_empty() {
        return Err(invalid("q1", "q grids must be non-empty"));
    }
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    spec.validate()?;
    let mut mean_db = vec![vec![0.0; q2_values.len()]; q1_values.len()];
    let mut rates = mean_db.clone();
    let mut mus = mean_db.clone();
    for (i, &q1) in q1_values.iter().enumerate() {
        for (j, &q2) in q2_values.iter().enumerate() {
            let cfg = template.clone().with_q(q1, q2);
            cfg.validate()?;
            let rows = run_trials_best_mu(spec, kind, &cfg, trials, mu_grid)?;
            mean_db[i][j] = mean_relerr_db(&rows);
            rates[i][j] = success_rate(&rows);
            mus[i][j] = rows[0].mu;
        }
    }
    Ok(GridReport {
        solver: kind,
        q1_values: q1_values.to_vec(),
        q2_values: q2_values.to_vec(),
        mean_relerr_db: mean_db,
        success_rate: rates,
        chosen_mu: mus,
        trials_per_cell: trials,
        spec: spec.clone(),
        config: template.clone(),
    })
}

/// Column norms of the rows of `x` (row 2-norms), used for row-support checks.
pub fn row_norms(x: &Array2<f64>) -> Array1<f64> {
    x.axis_iter(Axis(0)).map(|r| r.dot(&r).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_signal_support() {
        assert!(generate_sparse_signal(10, 0, 1).unwrap().iter().all(|&v| v == 0.0));
        assert!(generate_sparse_signal(10, 10, 1).unwrap().iter().all(|&v| v != 0.0));
        let x = generate_sparse_signal(50, 7, 3).unwrap();
        assert_eq!(x.iter().filter(|&&v| v != 0.0).count(), 7);
        assert_eq!(x, generate_sparse_signal(50, 7, 3).unwrap());
        assert!(generate_sparse_signal(5, 6, 0).is_err());
    }

    #[test]
    fn sparse_amplitudes_are_standard_normal() {
        let mut vals = Vec::new();
        for s in 0..10_000u64 {
            let x = generate_sparse_signal(256, 8, trial_seed(7, 8, s as usize)).unwrap();
            vals.extend(x.iter().filter(|&&v| v != 0.0).cloned());
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() <= 3.0 / n.sqrt(), "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "var {var}");
    }

    #[test]
    fn sas_gaussian_case_variance() {
        let gamma = 0.7;
        let x = sas_noise(100_000, 2.0, gamma, 5).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var / (2.0 * gamma * gamma) - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn sas_cauchy_case_median() {
        let gamma = 2.5;
        let x = sas_noise(100_000, 1.0, gamma, 9).unwrap();
        let mut abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let median = abs[abs.len() / 2];
        assert!((median / gamma - 1.0).abs() < 0.05, "median {median}");
    }

    #[test]
    fn sas_scale_family() {
        for alpha in [0.5, 1.0, 1.5] {
            let unit = sas_noise(64, alpha, 1.0, 21).unwrap();
            let small = sas_noise(64, alpha, 1e-3, 21).unwrap();
            for (a, b) in unit.iter().zip(small.iter()) {
                assert!((a * 1e-3 - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
        assert!(sas_noise(4, 0.0, 1.0, 0).is_err());
        assert!(sas_noise(4, 2.5, 1.0, 0).is_err());
        assert!(sas_noise(4, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn relerr_examples() {
        let t = Array1::from(vec![1.0, -2.0, 3.0]);
        assert_eq!(relerr(&t, &t).unwrap(), 0.0);
        assert_eq!(relerr(&Array1::zeros(3), &t).unwrap(), 1.0);
        assert_eq!(relerr(&(&t * 2.0), &t).unwrap(), 1.0);
        assert!(matches!(relerr(&t, &Array1::zeros(3)), Err(ExperimentError::ZeroTruth)));
    }

    #[test]
    fn select_mu_examples() {
        assert_eq!(select_mu(&[3.0], &[0.2]).unwrap(), 3.0);
        assert_eq!(select_mu(&[0.1, 1.0, 10.0], &[0.5, 0.01, 0.3]).unwrap(), 1.0);
        assert_eq!(select_mu(&[0.1, 1.0, 10.0], &[0.5, 0.01, 0.01]).unwrap(), 10.0);
        assert!(select_mu(&[], &[]).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = trial_seed(1, 5, 0);
        assert_eq!(a, trial_seed(1, 5, 0));
        assert_ne!(a, trial_seed(1, 5, 1));
        assert_ne!(a, trial_seed(1, 6, 0));
        assert_ne!(a, trial_seed(2, 5, 0));
    }

    #[test]
    fn default_mu_grid_spans_decades() {
        let g = default_mu_grid();
        assert_eq!(g.len(), 13);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[12] - 100.0).abs() < 1e-12);
        assert!((g[6] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_sparsity_trials_succeed() {
        let spec = SyntheticSpec { m: 16, n1: 16, n2: 16, ..SyntheticSpec::separation(0, 4) };
        let cfg = SolverConfig::default();
        let rows = run_trials(&spec, SolverKind::Bcd, &cfg, 3);
        assert!(rows.iter().all(|o| o.success));
    }
}
