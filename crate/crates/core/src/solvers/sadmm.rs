//! Standard two-block ADMM on the equality-constrained problem, with each
//! block subproblem replaced by a linearized prox step:
//!
//! ```text
//! x₁ ← prox_{q₁, c₁ρ/μ}(x₁ − A₁ᵀ(A₁x₁ + A₂x₂ − y − w/ρ)/c₁)
//! x₂ ← prox_{q₂, c₂ρ}(x₂ − A₂ᵀ(A₁x₁ + A₂x₂ − y − w/ρ)/c₂)
//! w  ← w − ρ(A₁x₁ + A₂x₂ − y)
//! ```
//!
//! Convergent for `q = 1`; for `q < 1` it carries no guarantee and the
//! result reports the iterate-gap test honestly.

use ndarray::Array2;

use super::{drive, relative_change, DemixIteration, DemixProblem, Result, Shrinkage, SolveResult, SolverConfig, StepInfo};

pub struct SadmmIter<'a> {
    problem: &'a DemixProblem,
    cfg: SolverConfig,
    rho: f64,
    c1: f64,
    c2: f64,
    x1: Array2<f64>,
    x2: Array2<f64>,
    w: Array2<f64>,
    ax1: Array2<f64>,
    ax2: Array2<f64>,
}

impl<'a> SadmmIter<'a> {
    pub fn new(p: &'a DemixProblem, cfg: &SolverConfig, init: Option<(Array2<f64>, Array2<f64>)>) -> Result<Self> {
        cfg.validate()?;
        p.require_single_channel("sadmm")?;
        let (x1, x2) = p.initial(init)?;
        let c1 = cfg.sadmm_c_factor * p.a1().spectral_bounds()?.lambda_max;
        let c2 = cfg.sadmm_c_factor * p.a2().spectral_bounds()?.lambda_max;
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(super::SolverError::InvalidConfig {
                field: "sadmm_c_factor",
                message: "linearization constant is zero for a zero operator".into(),
            });
        }
        let ax1 = p.a1().apply_columns(x1.view())?;
        let ax2 = p.a2().apply_columns(x2.view())?;
        Ok(SadmmIter {
            problem: p,
            cfg: cfg.clone(),
            rho: cfg.sadmm_rho,
            c1,
            c2,
            w: Array2::zeros(p.y().dim()),
            x1,
            x2,
            ax1,
            ax2,
        })
    }

    pub fn dual(&self) -> &Array2<f64> {
        &self.w
    }
}

impl DemixIteration for SadmmIter<'_> {
    fn step(&mut self) -> Result<StepInfo> {
        let p = self.problem;
        let rho = self.rho;
        let shift = p.y() + &(&self.w / rho);

        let r = &self.ax1 + &self.ax2 - &shift;
        let mut x1 = p.a1().apply_adjoint_columns(r.view())?;
        x1 *= -1.0 / self.c1;
        x1 += &self.x1;
        Shrinkage::Elementwise.apply(&mut x1, self.cfg.q1, self.c1 * rho / self.cfg.mu)?;
        let ax1 = p.a1().apply_columns(x1.view())?;

        let r = &ax1 + &self.ax2 - &shift;
        let mut x2 = p.a2().apply_adjoint_columns(r.view())?;
        x2 *= -1.0 / self.c2;
        x2 += &self.x2;
        Shrinkage::Elementwise.apply(&mut x2, self.cfg.q2, self.c2 * rho)?;
        let ax2 = p.a2().apply_columns(x2.view())?;

        let residual = &ax1 + &ax2 - p.y();
        self.w.scaled_add(-rho, &residual);

        let gap = relative_change(&x1, &self.x1).max(relative_change(&x2, &self.x2));
        self.x1 = x1;
        self.x2 = x2;
        self.ax1 = ax1;
        self.ax2 = ax2;

        let fit: f64 = residual.iter().map(|v| v * v).sum();
        let beta = self.cfg.beta_target;
        let objective = fit / beta
            + self.cfg.mu * Shrinkage::Elementwise.penalty(&self.x1, self.cfg.q1)
            + Shrinkage::Elementwise.penalty(&self.x2, self.cfg.q2);
        Ok(StepInfo { objective, residual: fit.sqrt(), gap, beta, beta_at_target: true })
    }

    fn x1(&self) -> &Array2<f64> {
        &self.x1
    }

    fn x2(&self) -> &Array2<f64> {
        &self.x2
    }
}

/// S-ADMM baseline. No continuation; the objective trace is reported at
/// `beta_target` for comparison with the other solvers.
pub fn sadmm_solve(p: &DemixProblem, cfg: &SolverConfig, init: Option<(Array2<f64>, Array2<f64>)>) -> Result<SolveResult> {
    let it = SadmmIter::new(p, cfg, init)?;
    let mut result = drive(it, cfg, Vec::new())?;
    result.final_beta = cfg.beta_target;
    Ok(result)
}
