//! Proximal block coordinate descent.
//!
//! Each block takes a gradient step on the quadratic fit linearized at the
//! current point, then a prox step:
//!
//! ```text
//! c₁ = x₁ − (2/η₁) A₁ᵀ(A₁x₁ + A₂x₂ − y),   x₁ ← prox_{q₁, η₁/(βμ)}(c₁)
//! c₂ = x₂ − (2/η₂) A₂ᵀ(A₁x₁ + A₂x₂ − y),   x₂ ← prox_{q₂, η₂/β}(c₂)
//! ```
//!
//! With `ηᵢ > 2λ_max(AᵢᵀAᵢ)` the objective at fixed `β` never increases.

use ndarray::Array2;

use super::{
    auto_proximal, check_theorem1, drive, next_beta, relative_change, DemixIteration, DemixProblem, Result,
    Shrinkage, SolveResult, SolverConfig, SolverError, StepInfo,
};

pub struct BcdIter<'a> {
    problem: &'a DemixProblem,
    cfg: SolverConfig,
    shrink: Shrinkage,
    eta1: f64,
    eta2: f64,
    beta: f64,
    x1: Array2<f64>,
    x2: Array2<f64>,
    ax1: Array2<f64>,
    ax2: Array2<f64>,
    warnings: Vec<String>,
}

impl<'a> BcdIter<'a> {
    /// Single-task iteration (elementwise shrinkage, one channel).
    pub fn single(p: &'a DemixProblem, cfg: &SolverConfig, init: Option<(Array2<f64>, Array2<f64>)>) -> Result<Self> {
        p.require_single_channel("bcd")?;
        Self::with_shrinkage(p, cfg, init, Shrinkage::Elementwise)
    }

    /// Multitask iteration (row-wise group shrinkage).
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
        let eta1 = cfg.eta1.unwrap_or_else(|| auto_proximal(b1));
        let eta2 = cfg.eta2.unwrap_or_else(|| auto_proximal(b2));
        if !(eta1 > 0.0 && eta2 > 0.0) {
            return Err(SolverError::InvalidConfig {
                field: "eta1",
                message: "automatic proximal parameter is zero for a zero operator".into(),
            });
        }
        let mut warnings = Vec::new();
        if !check_theorem1(eta1, eta2, b1, b2) {
            warnings.push(format!(
                "proximal parameters eta1 = {eta1}, eta2 = {eta2} violate eta_i > 2 lambda_max \
                 (lambda_max = {}, {}); descent is not guaranteed",
                b1.lambda_max, b2.lambda_max
            ));
        }
        let ax1 = p.a1().apply_columns(x1.view())?;
        let ax2 = p.a2().apply_columns(x2.view())?;
        Ok(BcdIter {
            problem: p,
            cfg: cfg.clone(),
            shrink,
            eta1,
            eta2,
            beta: cfg.beta_start,
            x1,
            x2,
            ax1,
            ax2,
            warnings,
        })
    }

    pub fn eta(&self) -> (f64, f64) {
        (self.eta1, self.eta2)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `β` for the next step.
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl DemixIteration for BcdIter<'_> {
    fn step(&mut self) -> Result<StepInfo> {
        let p = self.problem;
        let beta = self.beta;
        let mu = self.cfg.mu;

        let r = &self.ax1 + &self.ax2 - p.y();
        let mut c1 = p.a1().apply_adjoint_columns(r.view())?;
        c1 *= -2.0 / self.eta1;
        c1 += &self.x1;
        self.shrink.apply(&mut c1, self.cfg.q1, self.eta1 / (beta * mu))?;
        let ax1 = p.a1().apply_columns(c1.view())?;

        let r = &ax1 + &self.ax2 - p.y();
        let mut c2 = p.a2().apply_adjoint_columns(r.view())?;
        c2 *= -2.0 / self.eta2;
        c2 += &self.x2;
        self.shrink.apply(&mut c2, self.cfg.q2, self.eta2 / beta)?;
        let ax2 = p.a2().apply_columns(c2.view())?;

        let gap = relative_change(&c1, &self.x1).max(relative_change(&c2, &self.x2));
        self.x1 = c1;
        self.x2 = c2;
        self.ax1 = ax1;
        self.ax2 = ax2;

        let fit: f64 = self.ax1.iter().zip(self.ax2.iter()).zip(p.y().iter()).map(|((a, b), y)| (a + b - y).powi(2)).sum();
        let objective =
            fit / beta + mu * self.shrink.penalty(&self.x1, self.cfg.q1) + self.shrink.penalty(&self.x2, self.cfg.q2);
        let beta_at_target = beta <= self.cfg.beta_target;
        self.beta = next_beta(beta, &self.cfg);
        Ok(StepInfo { objective, residual: fit.sqrt(), gap, beta, beta_at_target })
    }

    fn x1(&self) -> &Array2<f64> {
        &self.x1
    }

    fn x2(&self) -> &Array2<f64> {
        &self.x2
    }
}

/// Single-task proximal BCD.
pub fn bcd_solve(p: &DemixProblem, cfg: &SolverConfig, init: Option<(Array2<f64>, Array2<f64>)>) -> Result<SolveResult> {
    let it = BcdIter::single(p, cfg, init)?;
    let warnings = it.warnings.clone();
    drive(it, cfg, warnings)
}

/// Multitask proximal BCD with row-wise group shrinkage.
pub fn multitask_bcd_solve(
    p: &DemixProblem,
    cfg: &SolverConfig,
    init: Option<(Array2<f64>, Array2<f64>)>,
) -> Result<SolveResult> {
    let it = BcdIter::multitask(p, cfg, init)?;
    let warnings = it.warnings.clone();
    drive(it, cfg, warnings)
}
