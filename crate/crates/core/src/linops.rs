//! Matrix-free linear operators.
//!
//! Every operator exposes the forward product `A x`, the adjoint product
//! `Aᵀ y`, and the extreme eigenvalues of `AᵀA` needed to pick step sizes
//! and penalties for the solvers. Orthonormal kinds (identity, DCT, IDCT,
//! orthonormalized Gaussian) satisfy `A Aᵀ = I`, which the ADMM x-step uses
//! to skip the linear solve.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Power iteration budget for matrix-free spectral estimates.
pub const POWER_MAX_ITERS: usize = 1000;
/// Relative change of the Rayleigh quotient at which power iteration stops.
pub const POWER_TOL: f64 = 1e-9;
/// Dense operators up to this many columns get an exact eigendecomposition
/// of `AᵀA` instead of power iteration.
pub const DIRECT_EIGEN_MAX_COLS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopError {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid operator shape: {0}")]
    InvalidShape(String),
    #[error("spectral estimate did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
}

pub type Result<T> = std::result::Result<T, LinopError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Dense,
    Identity,
    /// Orthonormal type-II DCT (analysis).
    Dct,
    /// Inverse of [`OperatorKind::Dct`] (synthesis).
    Idct,
    GaussianOrthonormal,
    /// Separable orthonormal 2-D DCT on a row-major `height × width` grid.
    Dct2d,
    /// Separable orthonormal 2-D inverse DCT.
    Idct2d,
}

impl OperatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Dense => "dense",
            OperatorKind::Identity => "identity",
            OperatorKind::Dct => "dct",
            OperatorKind::Idct => "idct",
            OperatorKind::GaussianOrthonormal => "gaussian-orthonormal",
            OperatorKind::Dct2d => "dct2d",
            OperatorKind::Idct2d => "idct2d",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dense" => Ok(OperatorKind::Dense),
            "identity" => Ok(OperatorKind::Identity),
            "dct" => Ok(OperatorKind::Dct),
            "idct" => Ok(OperatorKind::Idct),
            "gaussian-orthonormal" | "gaussian" => Ok(OperatorKind::GaussianOrthonormal),
            "dct2d" => Ok(OperatorKind::Dct2d),
            "idct2d" => Ok(OperatorKind::Idct2d),
            other => Err(format!(
                "unknown operator kind `{other}` (expected dense, identity, dct, idct, gaussian-orthonormal, dct2d or idct2d)"
            )),
        }
    }
}

/// Extreme eigenvalues of `AᵀA`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorBounds {
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl OperatorBounds {
    /// Bounds of a row-orthonormal `rows × cols` operator: `AᵀA` is an
    /// orthogonal projector of rank `rows`.
    pub fn row_orthonormal(rows: usize, cols: usize) -> Self {
        OperatorBounds {
            lambda_max: 1.0,
            lambda_min: if rows == cols { 1.0 } else { 0.0 },
        }
    }
}

type Plan = Arc<dyn TransformType2And3<f64>>;

#[derive(Clone)]
enum Body {
    Matrix(Arc<Array2<f64>>),
    Identity,
    Dct { plan: Plan, inverse: bool },
    Dct2d { height: usize, width: usize, col_plan: Plan, row_plan: Plan, inverse: bool },
}

/// An immutable `rows × cols` linear map.
#[derive(Clone)]
pub struct LinearOperator {
    rows: usize,
    cols: usize,
    kind: OperatorKind,
    body: Body,
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOperator")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("kind", &self.kind)
            .finish()
    }
}

impl LinearOperator {
    pub fn dense(matrix: Array2<f64>) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows == 0 || cols == 0 {
            return Err(LinopError::InvalidShape(format!("{rows}x{cols} matrix")));
        }
        Ok(LinearOperator {
            rows,
            cols,
            kind: OperatorKind::Dense,
            body: Body::Matrix(Arc::new(matrix)),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LinopError::InvalidShape("identity of size 0".into()));
        }
        Ok(LinearOperator { rows: n, cols: n, kind: OperatorKind::Identity, body: Body::Identity })
    }

    pub fn dct(n: usize) -> Result<Self> {
        Self::dct_1d(n, false)
    }

    pub fn idct(n: usize) -> Result<Self> {
        Self::dct_1d(n, true)
    }

    fn dct_1d(n: usize, inverse: bool) -> Result<Self> {
        if n == 0 {
            return Err(LinopError::InvalidShape("DCT of size 0".into()));
        }
        let plan = DctPlanner::new().plan_dct2(n);
        Ok(LinearOperator {
            rows: n,
            cols: n,
            kind: if inverse { OperatorKind::Idct } else { OperatorKind::Dct },
            body: Body::Dct { plan, inverse },
        })
    }

    /// 2-D orthonormal DCT over a row-major `height × width` grid.
    pub fn dct2d(height: usize, width: usize) -> Result<Self> {
        Self::dct_2d(height, width, false)
    }

    /// 2-D orthonormal inverse DCT; maps coefficients to pixels.
    pub fn idct2d(height: usize, width: usize) -> Result<Self> {
        Self::dct_2d(height, width, true)
    }

    fn dct_2d(height: usize, width: usize, inverse: bool) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(LinopError::InvalidShape(format!("{height}x{width} grid")));
        }
        let mut planner = DctPlanner::new();
        let col_plan = planner.plan_dct2(height);
        let row_plan = planner.plan_dct2(width);
        let n = height * width;
        Ok(LinearOperator {
            rows: n,
            cols: n,
            kind: if inverse { OperatorKind::Idct2d } else { OperatorKind::Dct2d },
            body: Body::Dct2d { height, width, col_plan, row_plan, inverse },
        })
    }

    /// Row-orthonormal Gaussian operator: i.i.d. standard-normal rows,
    /// orthonormalized by Gram–Schmidt. Deterministic in `seed`.
    pub fn gaussian_orthonormal(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LinopError::InvalidShape(format!("{rows}x{cols} matrix")));
        }
        if rows > cols {
            return Err(LinopError::InvalidShape(format!(
                "orthonormal rows need rows <= cols, got {rows}x{cols}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Array2::<f64>::zeros((rows, cols));
        let mut i = 0;
        while i < rows {
            let mut v: Array1<f64> = (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect();
            // Two passes of modified Gram-Schmidt keep the rows orthonormal to
            // working precision.
            for _ in 0..2 {
                for j in 0..i {
                    let r = m.row(j);
                    let proj = r.dot(&v);
                    v.scaled_add(-proj, &r);
                }
            }
            let norm = v.dot(&v).sqrt();
            if norm < 1e-8 {
                continue;
            }
            m.row_mut(i).assign(&(v / norm));
            i += 1;
        }
        Ok(LinearOperator {
            rows,
            cols,
            kind: OperatorKind::GaussianOrthonormal,
            body: Body::Matrix(Arc::new(m)),
        })
    }

    /// Builds an `n × n` operator of the given kind. `Dense` is not
    /// constructible this way; the 2-D kinds need a grid shape instead.
    pub fn square(kind: OperatorKind, n: usize, seed: u64) -> Result<Self> {
        Self::of_kind(kind, n, n, seed)
    }

    /// Builds a `rows × cols` operator of the given kind.
    pub fn of_kind(kind: OperatorKind, rows: usize, cols: usize, seed: u64) -> Result<Self> {
        let need_square = |op: Self| {
            if rows != cols {
                Err(LinopError::InvalidShape(format!("{kind} must be square, got {rows}x{cols}")))
            } else {
                Ok(op)
            }
        };
        match kind {
            OperatorKind::Identity => need_square(Self::identity(cols)?),
            OperatorKind::Dct => need_square(Self::dct(cols)?),
            OperatorKind::Idct => need_square(Self::idct(cols)?),
            OperatorKind::GaussianOrthonormal => Self::gaussian_orthonormal(rows, cols, seed),
            OperatorKind::Dense | OperatorKind::Dct2d | OperatorKind::Idct2d => Err(
                LinopError::InvalidShape(format!("{kind} operators cannot be built from a size alone")),
            ),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// True when `A Aᵀ = I` holds by construction.
    pub fn is_row_orthonormal(&self) -> bool {
        !matches!(self.kind, OperatorKind::Dense)
    }

    /// The explicit matrix, for kinds stored densely.
    pub fn matrix(&self) -> Option<&Array2<f64>> {
        match &self.body {
            Body::Matrix(m) => Some(m),
            _ => None,
        }
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len(self.cols, x.len())?;
        Ok(match &self.body {
            Body::Matrix(m) => m.dot(&x),
            Body::Identity => x.to_owned(),
            Body::Dct { plan, inverse } => {
                let mut buf = x.to_vec();
                if *inverse {
                    orthonormal_dct3(plan.as_ref(), &mut buf);
                } else {
                    orthonormal_dct2(plan.as_ref(), &mut buf);
                }
                Array1::from(buf)
            }
            Body::Dct2d { height, width, col_plan, row_plan, inverse } => {
                let mut buf = x.to_vec();
                separable_2d(&mut buf, *height, *width, col_plan.as_ref(), row_plan.as_ref(), *inverse);
                Array1::from(buf)
            }
        })
    }

    pub fn apply_adjoint(&self, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len(self.rows, y.len())?;
        Ok(match &self.body {
            Body::Matrix(m) => m.t().dot(&y),
            Body::Identity => y.to_owned(),
            Body::Dct { plan, inverse } => {
                let mut buf = y.to_vec();
                if *inverse {
                    orthonormal_dct2(plan.as_ref(), &mut buf);
                } else {
                    orthonormal_dct3(plan.as_ref(), &mut buf);
                }
                Array1::from(buf)
            }
            Body::Dct2d { height, width, col_plan, row_plan, inverse } => {
                let mut buf = y.to_vec();
                separable_2d(&mut buf, *height, *width, col_plan.as_ref(), row_plan.as_ref(), !*inverse);
                Array1::from(buf)
            }
        })
    }

    /// Applies the operator to every column of `x` (`cols × L` → `rows × L`).
    pub fn apply_columns(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_len(self.cols, x.nrows())?;
        if let Body::Matrix(m) = &self.body {
            return Ok(m.dot(&x));
        }
        let mut out = Array2::zeros((self.rows, x.ncols()));
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            out.column_mut(j).assign(&self.apply(col)?);
        }
        Ok(out)
    }

    pub fn apply_adjoint_columns(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_len(self.rows, y.nrows())?;
        if let Body::Matrix(m) = &self.body {
            return Ok(m.t().dot(&y));
        }
        let mut out = Array2::zeros((self.cols, y.ncols()));
        for (j, col) in y.axis_iter(Axis(1)).enumerate() {
            out.column_mut(j).assign(&self.apply_adjoint(col)?);
        }
        Ok(out)
    }

    /// Materializes the operator column by column.
    pub fn to_dense(&self) -> Array2<f64> {
        if let Body::Matrix(m) = &self.body {
            return (**m).clone();
        }
        let mut out = Array2::zeros((self.rows, self.cols));
        let mut e = Array1::zeros(self.cols);
        for j in 0..self.cols {
            e[j] = 1.0;
            out.column_mut(j).assign(&self.apply(e.view()).expect("unit vector has operator width"));
            e[j] = 0.0;
        }
        out
    }

    /// `λ_max(AᵀA)` and `λ_min(AᵀA)`.
    ///
    /// Orthonormal kinds use the closed form; small dense operators are
    /// diagonalized exactly; anything else falls back to power iteration.
    pub fn spectral_bounds(&self) -> Result<OperatorBounds> {
        if self.is_row_orthonormal() {
            return Ok(OperatorBounds::row_orthonormal(self.rows, self.cols));
        }
        match &self.body {
            Body::Matrix(m) if self.cols <= DIRECT_EIGEN_MAX_COLS => Ok(dense_gram_bounds(m)),
            _ => self.power_bounds(),
        }
    }

    /// Power iteration on `AᵀA` for `λ_max`, then on `λ_max·I − AᵀA` for
    /// `λ_min`.
    pub fn power_bounds(&self) -> Result<OperatorBounds> {
        let gram = |v: &Array1<f64>| -> Array1<f64> {
            let av = self.apply(v.view()).expect("power iterate has operator width");
            self.apply_adjoint(av.view()).expect("forward output has operator height")
        };
        let lambda_max = dominant_eigenvalue(self.cols, &gram)?;
        if lambda_max == 0.0 {
            return Ok(OperatorBounds { lambda_max: 0.0, lambda_min: 0.0 });
        }
        let shifted = |v: &Array1<f64>| -> Array1<f64> { lambda_max * v - gram(v) };
        let gap = dominant_eigenvalue(self.cols, &shifted)?;
        let lambda_min = (lambda_max - gap).clamp(0.0, lambda_max);
        Ok(OperatorBounds { lambda_max, lambda_min })
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LinopError::DimensionMismatch { expected, got })
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite map.
fn dominant_eigenvalue(n: usize, map: &dyn Fn(&Array1<f64>) -> Array1<f64>) -> Result<f64> {
    // Deterministic start with no special alignment to the DCT/identity bases.
    let mut v: Array1<f64> = (0..n).map(|i| 1.0 + ((i as f64) * 0.618_033_988_75).fract()).collect();
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = map(&v);
        let next = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w / wn;
        if (next - estimate).abs() <= POWER_TOL * next.abs() {
            return Ok(next.max(0.0));
        }
        estimate = next;
    }
    Err(LinopError::NoConvergence { iterations: POWER_MAX_ITERS })
}

fn dense_gram_bounds(m: &Array2<f64>) -> OperatorBounds {
    let (rows, cols) = m.dim();
    let a = DMatrix::from_fn(rows, cols, |i, j| m[[i, j]]);
    let gram = a.transpose() * &a;
    let eig = SymmetricEigen::new(gram);
    let lambda_max = eig.eigenvalues.max().max(0.0);
    let lambda_min = eig.eigenvalues.min().clamp(0.0, lambda_max);
    OperatorBounds { lambda_max, lambda_min }
}

/// In-place orthonormal DCT-II.
fn orthonormal_dct2(plan: &dyn TransformType2And3<f64>, buf: &mut [f64]) {
    let n = buf.len() as f64;
    plan.process_dct2(buf);
    let s0 = (1.0 / n).sqrt();
    let s = (2.0 / n).sqrt();
    buf[0] *= s0;
    for v in buf.iter_mut().skip(1) {
        *v *= s;
    }
}

/// In-place inverse of [`orthonormal_dct2`] (orthonormal DCT-III).
fn orthonormal_dct3(plan: &dyn TransformType2And3<f64>, buf: &mut [f64]) {
    let n = buf.len() as f64;
    // rustdct's DCT-III halves the DC input term.
    buf[0] *= 2.0 * (1.0 / n).sqrt();
    let s = (2.0 / n).sqrt();
    for v in buf.iter_mut().skip(1) {
        *v *= s;
    }
    plan.process_dct3(buf);
}

fn separable_2d(
    buf: &mut [f64],
    height: usize,
    width: usize,
    col_plan: &dyn TransformType2And3<f64>,
    row_plan: &dyn TransformType2And3<f64>,
    inverse: bool,
) {
    let transform = |plan: &dyn TransformType2And3<f64>, line: &mut [f64]| {
        if inverse {
            orthonormal_dct3(plan, line)
        } else {
            orthonormal_dct2(plan, line)
        }
    };
    for row in buf.chunks_exact_mut(width) {
        transform(row_plan, row);
    }
    let mut column = vec![0.0; height];
    for c in 0..width {
        for r in 0..height {
            column[r] = buf[r * width + c];
        }
        transform(col_plan, &mut column);
        for r in 0..height {
            buf[r * width + c] = column[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Textbook orthonormal DCT-II matrix, written out from the definition.
    fn dct_matrix(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(k, i)| {
            let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            s * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n as f64).cos()
        })
    }

    /// Cyclic Jacobi eigenvalue sweep, independent of nalgebra.
    fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[[i, j]].powi(2)).sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[[p, k]];
                        let aqk = a[[q, k]];
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[[i, i]]).collect()
    }

    fn all_kinds() -> Vec<LinearOperator> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dense = Array2::from_shape_fn((6, 9), |_| rng.random_range(-1.0..1.0));
        vec![
            LinearOperator::dense(dense).unwrap(),
            LinearOperator::identity(7).unwrap(),
            LinearOperator::dct(16).unwrap(),
            LinearOperator::idct(13).unwrap(),
            LinearOperator::gaussian_orthonormal(5, 12, 3).unwrap(),
            LinearOperator::dct2d(4, 6).unwrap(),
            LinearOperator::idct2d(5, 3).unwrap(),
        ]
    }

    #[test]
    fn identity_apply_and_adjoint() {
        let op = LinearOperator::identity(4).unwrap();
        let x = array![1.0, 2.0, 3.0, 4.0];
        assert_eq!(op.apply(x.view()).unwrap(), x);
        assert_eq!(op.apply_adjoint(x.view()).unwrap(), x);
    }

    #[test]
    fn dct_of_constant_is_dc_bin() {
        let op = LinearOperator::dct(8).unwrap();
        let x = Array1::from_elem(8, 1.0 / 8f64.sqrt());
        let y = op.apply(x.view()).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14);
        for v in y.iter().skip(1) {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn dct_matches_textbook_matrix() {
        for n in [1, 2, 5, 8, 17] {
            let fast = LinearOperator::dct(n).unwrap().to_dense();
            let slow = dct_matrix(n);
            let diff = (&fast - &slow).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(diff < 1e-13, "n={n} diff={diff}");
            let inv = LinearOperator::idct(n).unwrap().to_dense();
            let diff = (&inv - &slow.t()).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(diff < 1e-13, "idct n={n} diff={diff}");
        }
    }

    #[test]
    fn dct2d_is_kronecker_of_1d() {
        let (h, w) = (3, 5);
        let op = LinearOperator::dct2d(h, w).unwrap().to_dense();
        let ch = dct_matrix(h);
        let cw = dct_matrix(w);
        for (r1, c1, r2, c2) in itertools_grid(h, w) {
            let expect = ch[[r1, r2]] * cw[[c1, c2]];
            assert!((op[[r1 * w + c1, r2 * w + c2]] - expect).abs() < 1e-13);
        }
    }

    fn itertools_grid(h: usize, w: usize) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        for a in 0..h {
            for b in 0..w {
                for c in 0..h {
                    for d in 0..w {
                        out.push((a, b, c, d));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn dense_diagonal() {
        let op = LinearOperator::dense(array![[1.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(op.apply(array![1.0, 1.0].view()).unwrap(), array![1.0, 2.0]);
        assert_eq!(op.apply_adjoint(array![1.0, 2.0].view()).unwrap(), array![1.0, 4.0]);
        let b = op.spectral_bounds().unwrap();
        assert!((b.lambda_max - 4.0).abs() < 1e-12);
        assert!((b.lambda_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let op = LinearOperator::dct(8).unwrap();
        assert_eq!(
            op.apply(Array1::zeros(7).view()),
            Err(LinopError::DimensionMismatch { expected: 8, got: 7 })
        );
        let g = LinearOperator::gaussian_orthonormal(3, 6, 0).unwrap();
        assert!(g.apply_adjoint(Array1::zeros(6).view()).is_err());
    }

    #[test]
    fn adjoint_consistency_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for op in all_kinds() {
            for _ in 0..100 {
                let u = random_vec(&mut rng, op.cols());
                let v = random_vec(&mut rng, op.rows());
                let lhs = op.apply(u.view()).unwrap().dot(&v);
                let rhs = u.dot(&op.apply_adjoint(v.view()).unwrap());
                let scale = u.dot(&u).sqrt() * v.dot(&v).sqrt();
                assert!((lhs - rhs).abs() <= 1e-10 * scale, "{:?}", op.kind());
            }
        }
    }

    #[test]
    fn orthonormal_kinds_have_identity_gram_rows() {
        for op in all_kinds().into_iter().filter(|o| o.is_row_orthonormal()) {
            let a = op.to_dense();
            let aat = a.dot(&a.t());
            let err = (&aat - &Array2::<f64>::eye(op.rows())).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(err < 1e-10, "{:?}: {err}", op.kind());
        }
    }

    #[test]
    fn square_orthonormal_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for op in [
            LinearOperator::dct(32).unwrap(),
            LinearOperator::idct(32).unwrap(),
            LinearOperator::gaussian_orthonormal(32, 32, 1).unwrap(),
            LinearOperator::idct2d(8, 4).unwrap(),
        ] {
            let x = random_vec(&mut rng, 32);
            let back = op.apply_adjoint(op.apply(x.view()).unwrap().view()).unwrap();
            let err = (&back - &x).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn dct_then_idct_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dct = LinearOperator::dct(64).unwrap();
        let idct = LinearOperator::idct(64).unwrap();
        for _ in 0..20 {
            let x = random_vec(&mut rng, 64);
            let back = idct.apply(dct.apply(x.view()).unwrap().view()).unwrap();
            let err = (&back - &x).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn gaussian_orthonormal_contracts() {
        for (r, c, seed) in [(8, 8, 1), (4, 8, 2)] {
            let a = LinearOperator::gaussian_orthonormal(r, c, seed).unwrap().to_dense();
            let err = (&a.dot(&a.t()) - &Array2::<f64>::eye(r)).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(err < 1e-10);
        }
        let a = LinearOperator::gaussian_orthonormal(6, 10, 42).unwrap().to_dense();
        let b = LinearOperator::gaussian_orthonormal(6, 10, 42).unwrap().to_dense();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(matches!(
            LinearOperator::gaussian_orthonormal(9, 8, 0),
            Err(LinopError::InvalidShape(_))
        ));
    }

    #[test]
    fn closed_form_bounds() {
        for op in [LinearOperator::identity(8).unwrap(), LinearOperator::dct(8).unwrap()] {
            assert_eq!(op.spectral_bounds().unwrap(), OperatorBounds { lambda_max: 1.0, lambda_min: 1.0 });
        }
        let rect = LinearOperator::gaussian_orthonormal(4, 9, 0).unwrap();
        assert_eq!(rect.spectral_bounds().unwrap(), OperatorBounds { lambda_max: 1.0, lambda_min: 0.0 });
    }

    #[test]
    fn dense_bounds_match_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..20 {
            let rows = 1 + trial % 32;
            let cols = 1 + (trial * 7) % 32;
            let m = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
            let eig = jacobi_eigenvalues(m.t().dot(&m));
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min).max(0.0);
            let b = LinearOperator::dense(m).unwrap().spectral_bounds().unwrap();
            assert!((b.lambda_max - max).abs() <= 1e-8 * max.max(1.0), "{trial}");
            assert!((b.lambda_min - min).abs() <= 1e-8, "{trial}: {} vs {min}", b.lambda_min);
            assert!(0.0 <= b.lambda_min && b.lambda_min <= b.lambda_max);
        }
    }

    #[test]
    fn power_iteration_on_separated_spectrum() {
        let op = LinearOperator::dense(array![[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let b = op.power_bounds().unwrap();
        assert!((b.lambda_max - 9.0).abs() <= 1e-6 * 9.0);
        assert!((b.lambda_min - 1.0).abs() <= 1e-6);
        let zero = LinearOperator::dense(Array2::zeros((2, 3))).unwrap();
        assert_eq!(zero.power_bounds().unwrap(), OperatorBounds { lambda_max: 0.0, lambda_min: 0.0 });
    }

    #[test]
    fn power_iteration_reports_slow_convergence() {
        // Eigenvalue ratio 1 - 2e-4 needs tens of thousands of sweeps.
        let op = LinearOperator::dense(array![[1.0, 0.0], [0.0, 1.0 + 1e-4]]).unwrap();
        assert_eq!(op.power_bounds(), Err(LinopError::NoConvergence { iterations: POWER_MAX_ITERS }));
        // The exact path handles the same operator.
        let b = op.spectral_bounds().unwrap();
        assert!((b.lambda_max - (1.0 + 1e-4f64).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in [
            OperatorKind::Dense,
            OperatorKind::Identity,
            OperatorKind::Dct,
            OperatorKind::Idct,
            OperatorKind::GaussianOrthonormal,
            OperatorKind::Dct2d,
            OperatorKind::Idct2d,
        ] {
            assert_eq!(k.as_str().parse::<OperatorKind>().unwrap(), k);
        }
        assert!("wavelet".parse::<OperatorKind>().is_err());
    }
}
