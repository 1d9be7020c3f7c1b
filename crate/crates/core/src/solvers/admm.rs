//! Four-block ADMM on the split `x₁ = z₁, x₂ = z₂`.
//!
//! One iteration, in order:
//!
//! ```text
//! z₁ ← prox_{q₁, ρ₁/(βμ)}(x₁ + w₁/ρ₁)
//! z₂ ← prox_{q₂, ρ₂/β}(x₂ + w₂/ρ₂)
//! x₁ ← (2A₁ᵀA₁ + ρ₁I)⁻¹ [2A₁ᵀ(y − A₂x₂) + ρ₁z₁ − w₁]
//! x₂ ← (2A₂ᵀA₂ + ρ₂I)⁻¹ [2A₂ᵀ(y − A₁x₁) + ρ₂z₂ − w₂]
//! w₁ ← w₁ + ρ₁(x₁ − z₁)
//! w₂ ← w₂ + ρ₂(x₂ − z₂)
//! ```
//!
//! The returned `x1`, `x2` are the x-blocks; the sparse copies `z1`, `z2`
//! and the duals are reported in [`AdmmState`]. The objective trace is
//! evaluated at `(z₁, z₂)` so that `q = 0` counts true zeros; the two points
//! coincide at convergence.

use nalgebra::{Cholesky, DMatrix, Dyn};
use ndarray::Array2;

use super::{
    auto_penalty, check_theorem2, drive, next_beta, relative_change, AdmmState, DemixIteration, DemixProblem,
    Result, Shrinkage, SolveResult, SolverConfig, SolverError, StepInfo,
};
use crate::linops::LinearOperator;

/// Solver for `(2AᵀA + ρI) x = v`, factored once per penalty.
pub(crate) enum XStep {
    /// `A Aᵀ = I` gives `(2AᵀA + ρI)⁻¹ = I/ρ − 2AᵀA / (ρ(2 + ρ))`.
    Orthonormal { rho: f64 },
    Factored { chol: Cholesky<f64, Dyn> },
}

impl XStep {
    pub(crate) fn new(op: &LinearOperator, rho: f64) -> Result<Self> {
        if op.is_row_orthonormal() {
            return Ok(XStep::Orthonormal { rho });
        }
        let dense = op.to_dense();
        let (rows, cols) = dense.dim();
        let a = DMatrix::from_fn(rows, cols, |i, j| dense[[i, j]]);
        let mut system = a.transpose() * &a * 2.0;
        for i in 0..cols {
            system[(i, i)] += rho;
        }
        let chol = Cholesky::new(system).ok_or(SolverError::Singular(rho))?;
        Ok(XStep::Factored { chol })
    }

    pub(crate) fn solve(&self, op: &LinearOperator, v: Array2<f64>) -> Result<Array2<f64>> {
        match self {
            XStep::Orthonormal { rho } => {
                let ata_v = op.apply_adjoint_columns(op.apply_columns(v.view())?.view())?;
                let mut out = v / *rho;
                out.scaled_add(-2.0 / (rho * (2.0 + rho)), &ata_v);
                Ok(out)
            }
            XStep::Factored { chol } => {
                let (n, l) = v.dim();
                let rhs = DMatrix::from_fn(n, l, |i, j| v[[i, j]]);
                let sol = chol.solve(&rhs);
                Ok(Array2::from_shape_fn((n, l), |(i, j)| sol[(i, j)]))
            }
        }
    }
}

pub struct AdmmIter<'a> {
    problem: &'a DemixProblem,
    cfg: SolverConfig,
    shrink: Shrinkage,
    rho1: f64,
    rho2: f64,
    step1: XStep,
    step2: XStep,
    beta: f64,
    x1: Array2<f64>,
    x2: Array2<f64>,
    z1: Array2<f64>,
    z2: Array2<f64>,
    w1: Array2<f64>,
    w2: Array2<f64>,
    ax2: Array2<f64>,
    warnings: Vec<String>,
}

impl<'a> AdmmIter<'a> {
    pub fn single(p: &'a DemixProblem, cfg: &SolverConfig, init: Option<(Array2<f64>, Array2<f64>)>) -> Result<Self> {
        p.require_single_channel("admm")?;
        Self::with_shrinkage(p, cfg, init, Shrinkage::Elementwise)
    }

    pub fn multitask(p: &'a DemixProblem, cfg: &SolverConfig, init: Option<(Array2<f64>, Array2<f64>)>) -> Result<Self> {
        Self::with_shrinkage(p, cfg, init, Shrinkage::Rows)
    }

    fn with_shrinkage(
        p: &'a DemixProblem,
        cfg: &SolverConfig,
        init: Option<(Array2<f64>, Array2<f64>)>,
        shrink: Shrinkage,
    ) -> Result<Self> {
        cfg.validate()?;
        let (x1, x2) = p.initial(init)?;
        let b1 = p.a1().spectral_bounds()?;
        let b2 = p.a2().spectral_bounds()?;
        let auto = auto_penalty(b1, b2);
        let rho1 = cfg.rho1.unwrap_or(auto);
        let rho2 = cfg.rho2.unwrap_or(auto);
        let mut warnings = Vec::new();
        if !check_theorem2(rho1, rho2, b1, b2) {
            warnings.push(format!(
                "penalties rho1 = {rho1}, rho2 = {rho2} violate the ADMM convergence condition; \
                 convergence is not guaranteed"
            ));
        }
        let step1 = XStep::new(p.a1(), rho1)?;
        let step2 = XStep::new(p.a2(), rho2)?;
        let ax2 = p.a2().apply_columns(x2.view())?;
        Ok(AdmmIter {
            problem: p,
            cfg: cfg.clone(),
            shrink,
            rho1,
            rho2,
            step1,
            step2,
            beta: cfg.beta_start,
            z1: x1.clone(),
            z2: x2.clone(),
            w1: Array2::zeros(x1.dim()),
            w2: Array2::zeros(x2.dim()),
            x1,
            x2,
            ax2,
            warnings,
        })
    }

    pub fn rho(&self) -> (f64, f64) {
        (self.rho1, self.rho2)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn state(&self) -> AdmmState {
        AdmmState { z1: self.z1.clone(), z2: self.z2.clone(), w1: self.w1.clone(), w2: self.w2.clone() }
    }
}

impl DemixIteration for AdmmIter<'_> {
    fn step(&mut self) -> Result<StepInfo> {
        let p = self.problem;
        let beta = self.beta;
        let mu = self.cfg.mu;
        let (rho1, rho2) = (self.rho1, self.rho2);

        let mut z1 = &self.x1 + &(&self.w1 / rho1);
        self.shrink.apply(&mut z1, self.cfg.q1, rho1 / (beta * mu))?;
        let mut z2 = &self.x2 + &(&self.w2 / rho2);
        self.shrink.apply(&mut z2, self.cfg.q2, rho2 / beta)?;

        let mut rhs1 = p.a1().apply_adjoint_columns((p.y() - &self.ax2).view())?;
        rhs1 *= 2.0;
        rhs1.scaled_add(rho1, &z1);
        rhs1 -= &self.w1;
        let x1 = self.step1.solve(p.a1(), rhs1)?;
        let ax1 = p.a1().apply_columns(x1.view())?;

        let mut rhs2 = p.a2().apply_adjoint_columns((p.y() - &ax1).view())?;
        rhs2 *= 2.0;
        rhs2.scaled_add(rho2, &z2);
        rhs2 -= &self.w2;
        let x2 = self.step2.solve(p.a2(), rhs2)?;
        let ax2 = p.a2().apply_columns(x2.view())?;

        self.w1.scaled_add(rho1, &(&x1 - &z1));
        self.w2.scaled_add(rho2, &(&x2 - &z2));

        let gap = relative_change(&x1, &self.x1).max(relative_change(&x2, &self.x2));
        self.x1 = x1;
        self.x2 = x2;
        self.z1 = z1;
        self.z2 = z2;
        self.ax2 = ax2;

        let fit_x: f64 = ax1.iter().zip(self.ax2.iter()).zip(p.y().iter()).map(|((a, b), y)| (a + b - y).powi(2)).sum();
        let rz = p.residual(self.z1.view(), self.z2.view())?;
        let fit_z: f64 = rz.iter().map(|v| v * v).sum();
        let objective =
            fit_z / beta + mu * self.shrink.penalty(&self.z1, self.cfg.q1) + self.shrink.penalty(&self.z2, self.cfg.q2);
        let beta_at_target = beta <= self.cfg.beta_target;
        self.beta = next_beta(beta, &self.cfg);
        Ok(StepInfo { objective, residual: fit_x.sqrt(), gap, beta, beta_at_target })
    }

    fn x1(&self) -> &Array2<f64> {
        &self.x1
    }

    fn x2(&self) -> &Array2<f64> {
        &self.x2
    }

    fn admm_state(&self) -> Option<AdmmState> {
        Some(self.state())
    }
}

/// Single-task four-block ADMM.
pub fn admm_solve(p: &DemixProblem, cfg: &SolverConfig, init: Option<(Array2<f64>, Array2<f64>)>) -> Result<SolveResult> {
    let it = AdmmIter::single(p, cfg, init)?;
    let warnings = it.warnings.clone();
    drive(it, cfg, warnings)
}

/// Multitask ADMM with row-wise group shrinkage in the z-steps.
pub fn multitask_admm_solve(
    p: &DemixProblem,
    cfg: &SolverConfig,
    init: Option<(Array2<f64>, Array2<f64>)>,
) -> Result<SolveResult> {
    let it = AdmmIter::multitask(p, cfg, init)?;
    let warnings = it.warnings.clone();
    drive(it, cfg, warnings)
}
