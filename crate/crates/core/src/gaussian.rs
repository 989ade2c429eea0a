//! Gaussian fitting and the Fréchet Distance between Gaussians.
//!
//! For `N(μ_a, Σ_a)` and `N(μ_b, Σ_b)`:
//!
//! ```text
//! FD = ‖μ_a − μ_b‖² + Tr(Σ_a) + Tr(Σ_b) − 2·Tr((Σ_a Σ_b)^{1/2})
//! ```
//!
//! The cross term is evaluated as `Tr((Σ_a^{1/2} Σ_b Σ_a^{1/2})^{1/2})`, which
//! has the same eigenvalues as `Σ_a Σ_b` but is symmetric, so only real
//! symmetric eigendecompositions are needed. All numerics are f64.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_CLAMP_REL: f64 = 1e-10;
/// Minimum eigenvalue allowed in a covariance, relative to the largest.
pub const PSD_TOL_REL: f64 = 1e-8;
/// Relative asymmetry tolerated by [`matrix_sqrt_psd`].
pub const SYMMETRY_TOL_REL: f64 = 1e-10;
/// Ridge added to both covariances when the first eigensolve fails,
/// relative to the mean diagonal entry.
pub const RIDGE_REL: f64 = 1e-6;
/// Negative FD magnitudes above this are reported when clamped to zero.
pub const CLAMP_WARN: f64 = 1e-6;

const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("need at least 2 samples to fit a Gaussian, got {0}")]
    InsufficientSamples(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("covariance is not positive semidefinite (min eigenvalue {min:e}, max {max:e})")]
    NotPsd { min: f64, max: f64 },
    #[error("symmetric eigendecomposition did not converge for {dim}x{dim} matrix ({detail})")]
    EigenFailure { dim: usize, detail: String },
}

/// Mean and covariance of a set of embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    sample_count: usize,
}

impl GaussianStats {
    /// Validates and symmetrizes explicit parameters.
    pub fn new(
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        sample_count: usize,
    ) -> Result<Self, NumericError> {
        let p = mean.len();
        if cov.nrows() != p || cov.ncols() != p {
            return Err(NumericError::DimensionMismatch(p, cov.nrows()));
        }
        if sample_count < 2 {
            return Err(NumericError::InsufficientSamples(sample_count));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(NumericError::NonFinite("mean"));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(NumericError::NonFinite("covariance"));
        }
        let cov = symmetrize(&cov);
        let eig = eigen(cov.clone())?;
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if min < -PSD_TOL_REL * max.abs().max(f64::MIN_POSITIVE) {
            return Err(NumericError::NotPsd { min, max });
        }
        Ok(Self {
            mean,
            cov,
            sample_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, NumericError> {
    let dim = m.nrows();
    SymmetricEigen::try_new(m, f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| {
        NumericError::EigenFailure {
            dim,
            detail: format!("no convergence within {EIGEN_MAX_ITER} iterations"),
        }
    })
}

/// Column means and unbiased (n−1) covariance of an `n x p` sample matrix.
pub fn fit_gaussian(samples: &DMatrix<f64>) -> Result<GaussianStats, NumericError> {
    let n = samples.nrows();
    if n < 2 {
        return Err(NumericError::InsufficientSamples(n));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(NumericError::NonFinite("samples"));
    }
    let mean = samples.row_mean().transpose();
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    Ok(GaussianStats {
        mean,
        cov: symmetrize(&cov),
        sample_count: n,
    })
}

/// Principal square root of a symmetric PSD matrix.
///
/// Eigenvalues below `1e-10·λ_max` (including small negatives from
/// round-off) are set to zero before taking roots.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericError> {
    if !m.is_square() {
        return Err(NumericError::DimensionMismatch(m.nrows(), m.ncols()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(NumericError::NonFinite("matrix"));
    }
    let scale = m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL_REL * scale {
        return Err(NumericError::NotSymmetric(asym));
    }
    sqrt_symmetric(&symmetrize(m))
}

fn clamped_eigenvalues(values: &DVector<f64>) -> DVector<f64> {
    let max = values.max().max(0.0);
    let floor = EIGEN_CLAMP_REL * max;
    values.map(|v| if v < floor { 0.0 } else { v })
}

fn sqrt_symmetric(m: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericError> {
    let eig = eigen(m.clone())?;
    let roots = clamped_eigenvalues(&eig.eigenvalues).map(f64::sqrt);
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok(symmetrize(&s))
}

/// `Tr((Σ_a Σ_b)^{1/2})` via the symmetric form.
fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, NumericError> {
    let sqrt_a = sqrt_symmetric(a)?;
    let inner = symmetrize(&(&sqrt_a * b * &sqrt_a));
    let eig = eigen(inner)?;
    Ok(clamped_eigenvalues(&eig.eigenvalues).map(f64::sqrt).sum())
}

/// FD value together with what had to be done numerically to get it.
#[derive(Debug, Clone, PartialEq)]
pub struct FdOutcome {
    /// Clamped at zero.
    pub value: f64,
    /// Before clamping; may be slightly negative.
    pub raw_value: f64,
    pub mean_term: f64,
    pub trace_term: f64,
    /// Ridge added to both covariances after a failed eigensolve.
    pub ridge: Option<f64>,
    pub warnings: Vec<String>,
}

impl FdOutcome {
    pub fn regularized(&self) -> bool {
        self.ridge.is_some()
    }
}

pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64, NumericError> {
    frechet_distance_detailed(a, b).map(|o| o.value)
}

pub fn frechet_distance_detailed(
    a: &GaussianStats,
    b: &GaussianStats,
) -> Result<FdOutcome, NumericError> {
    if a.dim() != b.dim() {
        return Err(NumericError::DimensionMismatch(a.dim(), b.dim()));
    }
    let p = a.dim();
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let mut warnings = Vec::new();

    let (cross, ridge) = match trace_sqrt_product(&a.cov, &b.cov) {
        Ok(t) => (t, None),
        Err(first) => {
            let mean_diag = (a.cov.trace() + b.cov.trace()) / (2 * p) as f64;
            let eps = RIDGE_REL * mean_diag;
            let eye = DMatrix::<f64>::identity(p, p) * eps;
            let t = trace_sqrt_product(&(&a.cov + &eye), &(&b.cov + &eye)).map_err(|second| {
                NumericError::EigenFailure {
                    dim: p,
                    detail: format!("{first}; retry with ridge {eps:e} failed: {second}"),
                }
            })?;
            warnings.push(format!("eigensolve failed, regularized with ridge {eps:e}"));
            (t, Some(eps))
        }
    };

    // With a ridge, both traces refer to the regularized covariances too.
    let ridge_trace = 2.0 * p as f64 * ridge.unwrap_or(0.0);
    let trace_term = a.cov.trace() + b.cov.trace() + ridge_trace - 2.0 * cross;
    let raw_value = mean_term + trace_term;
    if raw_value < -CLAMP_WARN {
        let w = format!("FD of {raw_value:e} clamped to zero");
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(FdOutcome {
        value: raw_value.max(0.0),
        raw_value,
        mean_term,
        trace_term,
        ridge,
        warnings,
    })
}

/// FD between two univariate normals given means and standard deviations.
pub fn frechet_distance_univariate(mean_a: f64, sd_a: f64, mean_b: f64, sd_b: f64) -> f64 {
    (mean_a - mean_b).powi(2) + (sd_a - sd_b).powi(2)
}
