//! Dense linear algebra used by the modal decompositions: economy SVD,
//! rank selection, minimum-norm least squares and eigendecomposition.
//!
//! Factorizations are delegated to `faer`; this module fixes the contracts
//! (ordering, normalization, truncation rules) the rest of the crate relies on.

use faer::traits::ComplexField;
use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar types the decompositions run on: `f64` for real signals and
/// `Complex64` for complex ones.
pub trait Scalar: ComplexField<Real = f64> + Copy + Send + Sync + 'static {
    fn to_c64(self) -> Complex64;
    fn from_f64(x: f64) -> Self;
    fn from_c64_lossy(z: Complex64) -> Self;
    fn conjugate(self) -> Self;
    fn scaled(self, r: f64) -> Self;
}

impl Scalar for f64 {
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_c64_lossy(z: Complex64) -> Self {
        z.re
    }
    fn conjugate(self) -> Self {
        self
    }
    fn scaled(self, r: f64) -> Self {
        self * r
    }
}

impl Scalar for Complex64 {
    fn to_c64(self) -> Complex64 {
        self
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn from_c64_lossy(z: Complex64) -> Self {
        z
    }
    fn conjugate(self) -> Self {
        self.conj()
    }
    fn scaled(self, r: f64) -> Self {
        self * r
    }
}

/// Rule selecting how many singular values survive a truncated SVD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// Keep every σ_i ≥ ε·σ₁, with 0 < ε < 1.
    Tolerance(f64),
    /// Keep the first `n` singular values.
    FixedCount(usize),
    /// Gavish–Donoho hard threshold for unknown noise level.
    OptimalHardThreshold,
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationPolicy::Tolerance(eps) if !(eps > 0.0 && eps < 1.0) => Err(
                Error::InvalidArgument(format!("tolerance must lie strictly in (0, 1), got {eps}")),
            ),
            TruncationPolicy::FixedCount(0) => {
                Err(Error::InvalidArgument("fixed count must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for TruncationPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TruncationPolicy::Tolerance(eps) => write!(f, "tol:{eps:e}"),
            TruncationPolicy::FixedCount(n) => write!(f, "count:{n}"),
            TruncationPolicy::OptimalHardThreshold => write!(f, "oht"),
        }
    }
}

impl std::str::FromStr for TruncationPolicy {
    type Err = Error;

    /// Parses `tol:<eps>`, `count:<n>` or `oht`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognized truncation policy '{s}'"));
        let policy = match s.split_once(':') {
            Some(("tol", v)) => TruncationPolicy::Tolerance(v.parse().map_err(|_| bad())?),
            Some(("count", v)) => TruncationPolicy::FixedCount(v.parse().map_err(|_| bad())?),
            None if s == "oht" => TruncationPolicy::OptimalHardThreshold,
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Economy SVD `M = U diag(S) Vᴴ`.
#[derive(Debug, Clone)]
pub struct SvdResult<T: Scalar> {
    pub left_vectors: Mat<T>,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// Columns are the right singular vectors (V, not Vᴴ).
    pub right_vectors: Mat<T>,
}

impl<T: Scalar> SvdResult<T> {
    /// Keeps the leading `rank` triplets.
    pub fn truncate(&self, rank: usize) -> SvdResult<T> {
        let r = rank.min(self.singular_values.len());
        SvdResult {
            left_vectors: self.left_vectors.as_ref().get(.., ..r).to_owned(),
            singular_values: self.singular_values[..r].to_vec(),
            right_vectors: self.right_vectors.as_ref().get(.., ..r).to_owned(),
        }
    }

    /// `diag(S) Vᴴ`, the coordinates of the columns of M in the left basis.
    pub fn reduced_coordinates(&self) -> Mat<T> {
        let v = self.right_vectors.as_ref();
        Mat::from_fn(self.singular_values.len(), v.nrows(), |i, j| {
            v[(j, i)].conjugate().scaled(self.singular_values[i])
        })
    }
}

fn check_finite<T: Scalar>(m: MatRef<'_, T>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)].to_c64();
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite matrix entry at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

pub fn svd_econ<T: Scalar>(m: MatRef<'_, T>) -> Result<SvdResult<T>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("SVD of an empty matrix".into()));
    }
    check_finite(m)?;
    let svd = m.thin_svd().map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let singular_values = svd.S().column_vector().iter().map(|s| s.to_c64().re.max(0.0)).collect();
    Ok(SvdResult {
        left_vectors: svd.U().to_owned(),
        singular_values,
        right_vectors: svd.V().to_owned(),
    })
}

/// Median-based unknown-noise coefficient ω(β), cubic approximation.
pub fn optimal_threshold_coefficient(beta: f64) -> f64 {
    0.56 * beta.powi(3) - 0.95 * beta.powi(2) + 1.82 * beta + 1.43
}

fn median(sorted_desc: &[f64]) -> f64 {
    let n = sorted_desc.len();
    if n % 2 == 1 {
        sorted_desc[n / 2]
    } else {
        0.5 * (sorted_desc[n / 2 - 1] + sorted_desc[n / 2])
    }
}

/// Number of singular values retained by `policy`; always at least 1.
///
/// `matrix_shape` is the `(rows, cols)` shape of the factorized matrix and
/// only matters for the optimal hard threshold.
pub fn truncation_rank(
    singular_values: &[f64],
    policy: TruncationPolicy,
    matrix_shape: (usize, usize),
) -> Result<usize> {
    policy.validate()?;
    if singular_values.is_empty() {
        return Err(Error::InvalidArgument("no singular values given".into()));
    }
    if singular_values.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::InvalidArgument("singular values must be finite and non-negative".into()));
    }
    if singular_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("singular values must be sorted descending".into()));
    }
    let (rows, cols) = matrix_shape;
    if singular_values.len() > rows.min(cols) {
        return Err(Error::DimensionMismatch(format!(
            "{} singular values for a {rows}x{cols} matrix",
            singular_values.len()
        )));
    }
    let rank = match policy {
        TruncationPolicy::Tolerance(eps) => {
            let cut = eps * singular_values[0];
            singular_values.iter().take_while(|&&s| s >= cut).count()
        }
        TruncationPolicy::FixedCount(n) => n.min(singular_values.len()),
        TruncationPolicy::OptimalHardThreshold => {
            let beta = rows.min(cols) as f64 / rows.max(cols) as f64;
            let tau = optimal_threshold_coefficient(beta) * median(singular_values);
            singular_values.iter().take_while(|&&s| s > tau).count()
        }
    };
    Ok(rank.max(1))
}

/// Minimum-Frobenius-norm solution of `min ‖A X − B‖_F`.
///
/// Singular values below `max(m, n)·ε·σ₁` are treated as zero.
pub fn lstsq<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Result<Mat<T>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows but B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Mat::zeros(a.ncols(), b.ncols()));
    }
    check_finite(b)?;
    let svd = svd_econ(a)?;
    Ok(apply_pseudo_inverse(&svd, b, a.nrows().max(a.ncols())))
}

/// `V S⁺ Uᴴ B` using an existing factorization of A.
pub(crate) fn apply_pseudo_inverse<T: Scalar>(svd: &SvdResult<T>, b: MatRef<'_, T>, max_dim: usize) -> Mat<T> {
    let s1 = svd.singular_values[0];
    let cut = max_dim as f64 * f64::EPSILON * s1;
    let keep = svd.singular_values.iter().take_while(|&&s| s > cut && s > 0.0).count();
    let n = svd.right_vectors.nrows();
    if keep == 0 {
        return Mat::zeros(n, b.ncols());
    }
    let u = svd.left_vectors.as_ref().get(.., ..keep);
    let v = svd.right_vectors.as_ref().get(.., ..keep);
    let mut coeffs = u.adjoint() * b;
    for i in 0..keep {
        let inv = 1.0 / svd.singular_values[i];
        for j in 0..coeffs.ncols() {
            coeffs[(i, j)] = coeffs[(i, j)].scaled(inv);
        }
    }
    v * coeffs
}

/// Eigendecomposition of a square matrix.
///
/// Eigenvectors are unit-norm with their largest-magnitude entry real and
/// positive.
pub fn eig<T: Scalar>(a: MatRef<'_, T>) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    check_finite(a)?;
    let evd = a.eigen().map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let values: Vec<Complex64> = evd.S().column_vector().iter().copied().collect();
    let mut vectors = evd.U().to_owned();
    for j in 0..vectors.ncols() {
        normalize_phase(vectors.as_mut().col_mut(j).as_mat_mut().col_mut(0));
    }
    if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical("eigensolver produced non-finite eigenvalues".into()));
    }
    Ok((values, vectors))
}

/// Scales `v` to unit norm with its largest-magnitude entry real positive.
/// Zero vectors are left untouched.
pub(crate) fn normalize_phase(mut v: faer::ColMut<'_, Complex64>) {
    let norm = (0..v.nrows()).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut pivot = Complex64::new(0.0, 0.0);
    for i in 0..v.nrows() {
        if v[i].norm() > pivot.norm() {
            pivot = v[i];
        }
    }
    let rot = pivot.conj() / pivot.norm() / norm;
    for i in 0..v.nrows() {
        v[i] *= rot;
    }
}

pub(crate) fn to_complex_mat<T: Scalar>(m: MatRef<'_, T>) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].to_c64())
}
