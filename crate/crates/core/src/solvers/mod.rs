//! Demixing solvers for
//!
//! ```text
//! min  (1/β)‖A₁X₁ + A₂X₂ − Y‖²_F + μ Σᵢ‖X₁[i,:]‖^{q₁} + Σᵢ‖X₂[i,:]‖^{q₂}
//! ```
//!
//! with `β` driven toward a small target by geometric continuation. The
//! single-task solvers (`L = 1`) shrink elementwise; the multitask solvers
//! shrink whole rows so that all channels share a support.

mod admm;
mod bcd;
mod sadmm;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linops::{LinearOperator, LinopError, OperatorBounds};
use crate::prox::{self, ProxError, ProxParams};

pub use admm::{admm_solve, multitask_admm_solve, AdmmIter};
pub use bcd::{bcd_solve, multitask_bcd_solve, BcdIter};
pub use sadmm::{sadmm_solve, SadmmIter};

/// Factor applied to `λ_max(AᵀA)` for automatic BCD proximal parameters and
/// S-ADMM linearization constants.
pub const PROXIMAL_FACTOR: f64 = 2.1;
/// Safety factor over the smallest penalty satisfying the ADMM condition.
pub const PENALTY_FACTOR: f64 = 1.05;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid `{field}`: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("singular x-step system (rho = {0})")]
    Singular(f64),
    #[error(transparent)]
    Linop(#[from] LinopError),
    #[error(transparent)]
    Prox(#[from] ProxError),
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// `Y = A₁X₁ + A₂X₂` with `Y` of shape `m × L`.
#[derive(Debug, Clone)]
pub struct DemixProblem {
    a1: LinearOperator,
    a2: LinearOperator,
    y: Array2<f64>,
}

impl DemixProblem {
    pub fn new(a1: LinearOperator, a2: LinearOperator, y: Array2<f64>) -> Result<Self> {
        if a1.rows() != a2.rows() || a1.rows() != y.nrows() {
            return Err(SolverError::Dimension(format!(
                "A1 has {} rows, A2 has {} rows, Y has {} rows",
                a1.rows(),
                a2.rows(),
                y.nrows()
            )));
        }
        if y.ncols() == 0 {
            return Err(SolverError::Dimension("Y has no channels".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("measurements"));
        }
        Ok(DemixProblem { a1, a2, y })
    }

    /// Single-channel problem from a measurement vector.
    pub fn single(a1: LinearOperator, a2: LinearOperator, y: Array1<f64>) -> Result<Self> {
        let m = y.len();
        Self::new(a1, a2, y.into_shape_with_order((m, 1)).expect("column reshape"))
    }

    pub fn a1(&self) -> &LinearOperator {
        &self.a1
    }

    pub fn a2(&self) -> &LinearOperator {
        &self.a2
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn channels(&self) -> usize {
        self.y.ncols()
    }

    /// `A₁X₁ + A₂X₂ − Y`.
    pub fn residual(&self, x1: ArrayView2<f64>, x2: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut r = self.a1.apply_columns(x1)?;
        r += &self.a2.apply_columns(x2)?;
        r -= &self.y;
        Ok(r)
    }

    fn zeros(&self) -> (Array2<f64>, Array2<f64>) {
        let l = self.channels();
        (Array2::zeros((self.a1.cols(), l)), Array2::zeros((self.a2.cols(), l)))
    }

    fn initial(&self, init: Option<(Array2<f64>, Array2<f64>)>) -> Result<(Array2<f64>, Array2<f64>)> {
        let Some((x1, x2)) = init else {
            return Ok(self.zeros());
        };
        let l = self.channels();
        if x1.dim() != (self.a1.cols(), l) || x2.dim() != (self.a2.cols(), l) {
            return Err(SolverError::Dimension(format!(
                "initial point shapes {:?} and {:?} do not match ({}, {l}) and ({}, {l})",
                x1.dim(),
                x2.dim(),
                self.a1.cols(),
                self.a2.cols()
            )));
        }
        if x1.iter().chain(x2.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("initial point"));
        }
        Ok((x1, x2))
    }

    fn require_single_channel(&self, solver: &str) -> Result<()> {
        if self.channels() != 1 {
            return Err(SolverError::Dimension(format!(
                "{solver} is single-task but the problem has {} channels",
                self.channels()
            )));
        }
        Ok(())
    }
}

/// Solver settings shared by every algorithm. `None` for a proximal or
/// penalty parameter selects the automatic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub q1: f64,
    pub q2: f64,
    pub mu: f64,
    pub beta_target: f64,
    pub beta_start: f64,
    pub beta_decay: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    /// S-ADMM penalty.
    pub sadmm_rho: f64,
    /// S-ADMM linearization constants are this factor times `λ_max(AᵢᵀAᵢ)`.
    pub sadmm_c_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            q1: 0.5,
            q2: 0.5,
            mu: 1.0,
            beta_target: 1e-6,
            beta_start: 1.0,
            beta_decay: 0.97,
            max_iters: 5000,
            tol: 1e-8,
            eta1: None,
            eta2: None,
            rho1: None,
            rho2: None,
            sadmm_rho: 10.0,
            sadmm_c_factor: PROXIMAL_FACTOR,
        }
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> SolverError {
    SolverError::InvalidConfig { field, message: message.into() }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a positive finite number, got {v}")))
    }
}

impl SolverConfig {
    pub fn with_q(mut self, q1: f64, q2: f64) -> Self {
        self.q1 = q1;
        self.q2 = q2;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (field, q) in [("q1", self.q1), ("q2", self.q2)] {
            if !(0.0..=1.0).contains(&q) {
                return Err(invalid(field, format!("must lie in [0, 1], got {q}")));
            }
        }
        positive("mu", self.mu)?;
        positive("beta_target", self.beta_target)?;
        positive("beta_start", self.beta_start)?;
        if self.beta_target > self.beta_start {
            return Err(invalid(
                "beta_target",
                format!("must not exceed beta_start ({} > {})", self.beta_target, self.beta_start),
            ));
        }
        if !(self.beta_decay > 0.0 && self.beta_decay < 1.0) {
            return Err(invalid("beta_decay", format!("must lie in (0, 1), got {}", self.beta_decay)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        positive("tol", self.tol)?;
        for (field, v) in [("eta1", self.eta1), ("eta2", self.eta2), ("rho1", self.rho1), ("rho2", self.rho2)] {
            if let Some(v) = v {
                positive(field, v)?;
            }
        }
        positive("sadmm_rho", self.sadmm_rho)?;
        positive("sadmm_c_factor", self.sadmm_c_factor)?;
        Ok(())
    }
}

/// One step of the continuation schedule: `max(decay·β, target)`.
pub fn next_beta(beta: f64, cfg: &SolverConfig) -> f64 {
    (cfg.beta_decay * beta).max(cfg.beta_target)
}

/// BCD convergence condition: `ηᵢ > 2 λ_max(AᵢᵀAᵢ)` for both blocks. The
/// multitask condition on `η₃, η₄` is the same check.
pub fn check_theorem1(eta1: f64, eta2: f64, b1: OperatorBounds, b2: OperatorBounds) -> bool {
    eta1 > 2.0 * b1.lambda_max && eta2 > 2.0 * b2.lambda_max
}

/// ADMM convergence condition on the penalties `ρ₁, ρ₂` (and identically on
/// the multitask `ρ₃, ρ₄`):
///
/// ```text
/// ρ₁ > 16λ₁²/ρ₁ + 16λ₁λ₂/ρ₂ − 2φ₁
/// ρ₂ > 16λ₂²/ρ₂ + 16λ₁λ₂/ρ₁ − 2φ₂
/// ```
/// with `λᵢ = λ_max(AᵢᵀAᵢ)` and `φᵢ = λ_min(AᵢᵀAᵢ)`.
pub fn check_theorem2(rho1: f64, rho2: f64, b1: OperatorBounds, b2: OperatorBounds) -> bool {
    let (l1, l2) = (b1.lambda_max, b2.lambda_max);
    rho1 > 16.0 * l1 * l1 / rho1 + 16.0 * l1 * l2 / rho2 - 2.0 * b1.lambda_min
        && rho2 > 16.0 * l2 * l2 / rho2 + 16.0 * l1 * l2 / rho1 - 2.0 * b2.lambda_min
}

/// Smallest common penalty `ρ₁ = ρ₂ = ρ*` at which the ADMM condition holds
/// with equality in its binding block.
pub fn admm_penalty_threshold(b1: OperatorBounds, b2: OperatorBounds) -> f64 {
    let total = b1.lambda_max + b2.lambda_max;
    // Equal penalties reduce block i to ρ² + 2φᵢρ − 16λᵢ(λ₁ + λ₂) > 0.
    let root = |b: OperatorBounds| -b.lambda_min + (b.lambda_min.powi(2) + 16.0 * b.lambda_max * total).sqrt();
    root(b1).max(root(b2))
}

/// Automatic BCD proximal parameters `ηᵢ = 2.1 λ_max(AᵢᵀAᵢ)`.
pub fn auto_proximal(b: OperatorBounds) -> f64 {
    PROXIMAL_FACTOR * b.lambda_max
}

/// Automatic equal ADMM penalties, `1.05 ρ*`.
pub fn auto_penalty(b1: OperatorBounds, b2: OperatorBounds) -> f64 {
    PENALTY_FACTOR * admm_penalty_threshold(b1, b2)
}

/// `(1/β)‖A₁X₁ + A₂X₂ − Y‖²_F + μ Σ‖X₁ row‖^q₁ + Σ‖X₂ row‖^q₂` at the given
/// `β`. For a single channel the row terms are the elementwise `‖x‖_q^q`.
pub fn objective_value(
    p: &DemixProblem,
    x1: ArrayView2<f64>,
    x2: ArrayView2<f64>,
    cfg: &SolverConfig,
    beta: f64,
) -> Result<f64> {
    let r = p.residual(x1, x2)?;
    let fit = r.iter().map(|v| v * v).sum::<f64>();
    Ok(fit / beta + cfg.mu * row_penalty(x1, cfg.q1) + row_penalty(x2, cfg.q2))
}

/// `Σᵢ ‖X[i,:]‖₂^q`.
pub fn row_penalty(x: ArrayView2<f64>, q: f64) -> f64 {
    if x.ncols() == 1 {
        return prox::lq_penalty(x.column(0), q);
    }
    x.axis_iter(Axis(0)).map(|row| prox::abs_pow(row.dot(&row).sqrt(), q)).sum()
}

/// How a block is shrunk by the prox step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shrinkage {
    Elementwise,
    Rows,
}

impl Shrinkage {
    fn apply(self, x: &mut Array2<f64>, q: f64, eta: f64) -> Result<()> {
        let p = ProxParams::new(q, eta)?;
        match self {
            Shrinkage::Elementwise => {
                for v in x.iter_mut() {
                    *v = prox::prox_scalar(*v, p)?;
                }
            }
            Shrinkage::Rows => {
                for row in x.axis_iter_mut(Axis(0)) {
                    prox::prox_group_inplace(row, p)?;
                }
            }
        }
        Ok(())
    }

    fn penalty(self, x: &Array2<f64>, q: f64) -> f64 {
        match self {
            Shrinkage::Elementwise => x.iter().map(|&v| prox::abs_pow(v, q)).sum(),
            Shrinkage::Rows => x.axis_iter(Axis(0)).map(|row| prox::abs_pow(row.dot(&row).sqrt(), q)).sum(),
        }
    }
}

fn frob(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative iterate change `‖new − old‖ / max(‖old‖, 1)`.
fn relative_change(new: &Array2<f64>, old: &Array2<f64>) -> f64 {
    let diff = new.iter().zip(old.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    diff / frob(old).max(1.0)
}

/// Split and dual variables of the ADMM solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    #[serde(serialize_with = "ser_matrix", deserialize_with = "de_matrix")]
    pub z1: Array2<f64>,
    #[serde(serialize_with = "ser_matrix", deserialize_with = "de_matrix")]
    pub z2: Array2<f64>,
    #[serde(serialize_with = "ser_matrix", deserialize_with = "de_matrix")]
    pub w1: Array2<f64>,
    #[serde(serialize_with = "ser_matrix", deserialize_with = "de_matrix")]
    pub w2: Array2<f64>,
}

/// Output of a solve. `x1`, `x2` are `n × L` matrices; traces have one entry
/// per executed iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(serialize_with = "ser_matrix", deserialize_with = "de_matrix")]
    pub x1: Array2<f64>,
    #[serde(serialize_with = "ser_matrix", deserialize_with = "de_matrix")]
    pub x2: Array2<f64>,
    pub objective_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub iterate_gap_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_beta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admm_state: Option<AdmmState>,
}

impl SolveResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solve result serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// First column of `x1`.
    pub fn x1_vector(&self) -> Array1<f64> {
        self.x1.column(0).to_owned()
    }

    pub fn x2_vector(&self) -> Array1<f64> {
        self.x2.column(0).to_owned()
    }
}

/// Matrices serialize as a list of rows.
fn ser_matrix<S: Serializer>(m: &Array2<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    rows.serialize(s)
}

fn de_matrix<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Array2<f64>, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(serde::de::Error::custom("ragged matrix rows"));
    }
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect()).map_err(serde::de::Error::custom)
}

/// Per-iteration report from a solver step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Objective at the `β` used for this step.
    pub objective: f64,
    /// `‖A₁X₁ + A₂X₂ − Y‖_F` after the step.
    pub residual: f64,
    /// Largest relative block change.
    pub gap: f64,
    pub beta: f64,
    /// Whether `β` had reached its target for this step.
    pub beta_at_target: bool,
}

/// A solver advanced one iteration at a time.
pub trait DemixIteration {
    fn step(&mut self) -> Result<StepInfo>;
    fn x1(&self) -> &Array2<f64>;
    fn x2(&self) -> &Array2<f64>;
    fn admm_state(&self) -> Option<AdmmState> {
        None
    }
}

/// Runs an iteration to convergence or `max_iters`.
///
/// Stops once the iterate gap is at most `tol` with `β` at its target. The
/// all-zero point with zero residual is fixed for every `β` and also stops.
pub(crate) fn drive<I: DemixIteration>(mut it: I, cfg: &SolverConfig, warnings: Vec<String>) -> Result<SolveResult> {
    let mut objective_trace = Vec::new();
    let mut residual_trace = Vec::new();
    let mut iterate_gap_trace = Vec::new();
    let mut converged = false;
    let mut final_beta = cfg.beta_start;
    for _ in 0..cfg.max_iters {
        let info = it.step()?;
        if !(info.objective.is_finite() && info.residual.is_finite()) {
            return Err(SolverError::NonFinite("iterates"));
        }
        objective_trace.push(info.objective);
        residual_trace.push(info.residual);
        iterate_gap_trace.push(info.gap);
        final_beta = info.beta;
        let zero_fixed = info.gap == 0.0
            && info.residual == 0.0
            && it.x1().iter().chain(it.x2().iter()).all(|&v| v == 0.0);
        if (info.gap <= cfg.tol && info.beta_at_target) || zero_fixed {
            converged = true;
            break;
        }
    }
    Ok(SolveResult {
        x1: it.x1().clone(),
        x2: it.x2().clone(),
        iterations: objective_trace.len(),
        objective_trace,
        residual_trace,
        iterate_gap_trace,
        converged,
        final_beta,
        warnings,
        admm_state: it.admm_state(),
    })
}

/// Solver identifiers used by the experiment harness and CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Bcd,
    Admm,
    MtBcd,
    MtAdmm,
    Sadmm,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [SolverKind::Bcd, SolverKind::Admm, SolverKind::MtBcd, SolverKind::MtAdmm, SolverKind::Sadmm];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Bcd => "bcd",
            SolverKind::Admm => "admm",
            SolverKind::MtBcd => "mt-bcd",
            SolverKind::MtAdmm => "mt-admm",
            SolverKind::Sadmm => "sadmm",
        }
    }

    pub fn is_multitask(self) -> bool {
        matches!(self, SolverKind::MtBcd | SolverKind::MtAdmm)
    }

    /// The single-task counterpart of a multitask solver.
    pub fn single_task(self) -> SolverKind {
        match self {
            SolverKind::MtBcd => SolverKind::Bcd,
            SolverKind::MtAdmm => SolverKind::Admm,
            other => other,
        }
    }

    /// The multitask counterpart; S-ADMM has none and maps to itself.
    pub fn multitask(self) -> SolverKind {
        match self {
            SolverKind::Bcd => SolverKind::MtBcd,
            SolverKind::Admm => SolverKind::MtAdmm,
            other => other,
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bcd" => Ok(SolverKind::Bcd),
            "admm" => Ok(SolverKind::Admm),
            "mt-bcd" | "multitask_bcd" | "multitask-bcd" => Ok(SolverKind::MtBcd),
            "mt-admm" | "multitask_admm" | "multitask-admm" => Ok(SolverKind::MtAdmm),
            "sadmm" | "s-admm" => Ok(SolverKind::Sadmm),
            other => Err(format!("unknown solver `{other}` (expected bcd, admm, mt-bcd, mt-admm or sadmm)")),
        }
    }
}

/// Dispatches to the named solver.
pub fn solve(
    kind: SolverKind,
    p: &DemixProblem,
    cfg: &SolverConfig,
    init: Option<(Array2<f64>, Array2<f64>)>,
) -> Result<SolveResult> {
    match kind {
        SolverKind::Bcd => bcd_solve(p, cfg, init),
        SolverKind::Admm => admm_solve(p, cfg, init),
        SolverKind::MtBcd => multitask_bcd_solve(p, cfg, init),
        SolverKind::MtAdmm => multitask_admm_solve(p, cfg, init),
        SolverKind::Sadmm => sadmm_solve(p, cfg, init),
    }
}
