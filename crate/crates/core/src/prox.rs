//! Proximity operators of `‖·‖_q^q` for `0 ≤ q ≤ 1`.
//!
//! `prox_{q,η}(t) = argmin_x |x|^q + (η/2)(x − t)²` is hard thresholding at
//! `q = 0`, soft thresholding at `q = 1`, and in between a threshold at `τ`
//! followed by the root of `h(z) = q z^{q−1} + η z − η|t|` on `(β, |t|)`.
//! Ties at the threshold resolve to zero.
//!
//! The group operator minimizes `‖x‖₂^q + (η/2)‖x − t‖²` and is a scaled
//! copy of `t`: `x = prox_{q, η‖t‖^{2−q}}(1) · t`.

use ndarray::{Array1, ArrayView1, ArrayViewMut1, Zip};
use thiserror::Error;

/// Newton iteration cap for the fractional-q root.
pub const NEWTON_MAX_ITERS: usize = 100;
/// Stop once `|h(z)| ≤ NEWTON_REL_TOL · η · |t|`.
pub const NEWTON_REL_TOL: f64 = 1e-12;
/// Group inputs with a smaller norm map to zero.
pub const GROUP_NORM_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("invalid prox parameters: q = {q} must lie in [0, 1] and eta = {eta} must be positive and finite")]
    InvalidParams { q: f64, eta: f64 },
    #[error("root of h(z) not found for t = {t}, q = {q}, eta = {eta}")]
    RootNotFound { t: f64, q: f64, eta: f64 },
    #[error("non-finite prox input {0}")]
    NonFinite(f64),
}

pub type Result<T> = std::result::Result<T, ProxError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxParams {
    q: f64,
    eta: f64,
}

impl ProxParams {
    pub fn new(q: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) || !(eta > 0.0 && eta.is_finite()) {
            return Err(ProxError::InvalidParams { q, eta });
        }
        Ok(ProxParams { q, eta })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Largest `|t|` mapped to zero.
    pub fn threshold(&self) -> f64 {
        if self.q == 0.0 {
            (2.0 / self.eta).sqrt()
        } else if self.q == 1.0 {
            1.0 / self.eta
        } else {
            FractionalProxConstants::new(self.q, self.eta).tau
        }
    }
}

/// Threshold constants of the fractional case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalProxConstants {
    /// Smallest nonzero magnitude the operator can return.
    pub beta_thresh: f64,
    /// Inputs with `|t| ≤ tau` map to zero.
    pub tau: f64,
}

impl FractionalProxConstants {
    pub fn new(q: f64, eta: f64) -> Self {
        let beta_thresh = (2.0 * (1.0 - q) / eta).powf(1.0 / (2.0 - q));
        let tau = beta_thresh + q * beta_thresh.powf(q - 1.0) / eta;
        FractionalProxConstants { beta_thresh, tau }
    }
}

/// `|x|^q` with the convention `0^0 = 0`.
#[inline]
pub fn abs_pow(x: f64, q: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if q == 0.0 {
        1.0
    } else if q == 1.0 {
        x.abs()
    } else {
        x.abs().powf(q)
    }
}

/// `Σ |x_i|^q`; counts nonzeros when `q = 0`.
pub fn lq_penalty(x: ArrayView1<f64>, q: f64) -> f64 {
    x.iter().map(|&v| abs_pow(v, q)).sum()
}

/// `|x|^q + (η/2)(x − t)²`.
pub fn scalar_objective(x: f64, t: f64, p: ProxParams) -> f64 {
    abs_pow(x, p.q) + 0.5 * p.eta * (x - t) * (x - t)
}

/// `‖x‖₂^q + (η/2)‖x − t‖²`.
pub fn group_objective(x: ArrayView1<f64>, t: ArrayView1<f64>, p: ProxParams) -> f64 {
    let norm = x.dot(&x).sqrt();
    let dist2: f64 = x.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    abs_pow(norm, p.q) + 0.5 * p.eta * dist2
}

pub fn prox_scalar(t: f64, p: ProxParams) -> Result<f64> {
    if !t.is_finite() {
        return Err(ProxError::NonFinite(t));
    }
    let at = t.abs();
    let q = p.q;
    let eta = p.eta;
    if q == 0.0 {
        return Ok(if at <= (2.0 / eta).sqrt() { 0.0 } else { t });
    }
    if q == 1.0 {
        return Ok(t.signum() * (at - 1.0 / eta).max(0.0));
    }
    let FractionalProxConstants { beta_thresh, tau } = FractionalProxConstants::new(q, eta);
    if at <= tau {
        return Ok(0.0);
    }
    let z = fractional_root(at, q, eta, beta_thresh)?;
    Ok(t.signum() * z)
}

/// Safeguarded Newton solve of `q z^{q−1} + η z = η|t|` on `(β, |t|)`.
///
/// `h` is convex and increasing on the bracket, so Newton started at the
/// right end decreases monotonically onto the root; the bracket only catches
/// rounding trouble.
fn fractional_root(at: f64, q: f64, eta: f64, beta_thresh: f64) -> Result<f64> {
    let h = |z: f64| q * z.powf(q - 1.0) + eta * z - eta * at;
    let dh = |z: f64| q * (q - 1.0) * z.powf(q - 2.0) + eta;
    let tol = NEWTON_REL_TOL * eta * at;
    let mut lo = beta_thresh;
    let mut hi = at;
    let mut z = at;
    for _ in 0..NEWTON_MAX_ITERS {
        let hz = h(z);
        if hz.abs() <= tol {
            return Ok(z);
        }
        if hz > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let step = z - hz / dh(z);
        z = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(z);
        }
    }
    if (hi - lo) <= 1e-12 * hi && z.is_finite() {
        return Ok(z);
    }
    Err(ProxError::RootNotFound { t: at, q, eta })
}

pub fn prox_vector(t: ArrayView1<f64>, p: ProxParams) -> Result<Array1<f64>> {
    let mut out = t.to_owned();
    prox_vector_inplace(out.view_mut(), p)?;
    Ok(out)
}

pub fn prox_vector_inplace(mut t: ArrayViewMut1<f64>, p: ProxParams) -> Result<()> {
    for v in t.iter_mut() {
        *v = prox_scalar(*v, p)?;
    }
    Ok(())
}

/// Shrinkage factor `α ∈ [0, 1]` with `prox_group(t) = α t`.
pub fn group_scale(norm: f64, p: ProxParams) -> Result<f64> {
    if !norm.is_finite() {
        return Err(ProxError::NonFinite(norm));
    }
    if norm < GROUP_NORM_FLOOR {
        return Ok(0.0);
    }
    let scaled_eta = p.eta * norm.powf(2.0 - p.q);
    if !scaled_eta.is_finite() {
        return Ok(1.0);
    }
    if scaled_eta == 0.0 {
        return Ok(0.0);
    }
    prox_scalar(1.0, ProxParams { q: p.q, eta: scaled_eta })
}

pub fn prox_group(t: ArrayView1<f64>, p: ProxParams) -> Result<Array1<f64>> {
    let mut out = t.to_owned();
    prox_group_inplace(out.view_mut(), p)?;
    Ok(out)
}

pub fn prox_group_inplace(mut t: ArrayViewMut1<f64>, p: ProxParams) -> Result<()> {
    let norm = t.dot(&t).sqrt();
    let alpha = group_scale(norm, p)?;
    if alpha == 0.0 {
        t.fill(0.0);
    } else {
        Zip::from(&mut t).for_each(|v| *v *= alpha);
    }
    Ok(())
}
