//! Dense symmetric linear algebra for small matrices.
//!
//! Eigenvalues below `EIGEN_FLOOR_RATIO * largest` are clamped up to that floor
//! before taking square roots, inverse square roots or determinants, so a
//! covariance that is collapsing towards singularity stays usable until the
//! optimizer's own step-size termination fires.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor applied by all SPD functions.
pub const EIGEN_FLOOR_RATIO: f64 = 1e-20;

/// A dense symmetric matrix. Symmetry is exact: every constructor mirrors one
/// triangle onto the other.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "dimension must be at least 1");
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds the matrix from its lower triangle; `f(i, j)` is only called for `j <= i`.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Symmetrizes an arbitrary square matrix as `(A + Aᵀ) / 2`.
    pub fn symmetrize(a: &DMatrix<f64>) -> Self {
        assert!(a.is_square() && a.nrows() >= 1, "matrix must be square and non-empty");
        Self::from_lower_fn(a.nrows(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
    }

    /// Row-major `d × d` data, mirrored from the lower triangle.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for dimension {dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self::from_lower_fn(dim, |i, j| data[i * dim + j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn scale(&self, k: f64) -> SymMatrix {
        SymMatrix(&self.0 * k)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Full-matrix row-major vectorization (`d²` entries).
    pub fn vec(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }
}

/// Eigenvalues in nondecreasing order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Eigenvalues with the relative floor applied.
    pub fn clamped_eigenvalues(&self) -> Result<DVector<f64>> {
        let largest = self.max();
        if !(largest.is_finite() && largest > 0.0) {
            return Err(Error::NotPositiveDefinite { largest });
        }
        let floor = EIGEN_FLOOR_RATIO * largest;
        let clamped = self.eigenvalues.map(|v| v.max(floor));
        if clamped.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(Error::NotPositiveDefinite { largest });
        }
        Ok(clamped)
    }

    /// `Q diag(f(λ)) Qᵀ` over the clamped eigenvalues.
    pub fn rebuild(&self, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        let lam = self.clamped_eigenvalues()?;
        Ok(self.rebuild_with(&lam.map(f)))
    }

    pub(crate) fn rebuild_with(&self, diag: &DVector<f64>) -> SymMatrix {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= diag[j];
        }
        SymMatrix::symmetrize(&(scaled * q.transpose()))
    }

    /// Whether the floor changes any eigenvalue.
    pub fn needs_clamp(&self) -> bool {
        let floor = EIGEN_FLOOR_RATIO * self.max();
        self.eigenvalues.iter().any(|v| *v < floor)
    }
}

pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let d = a.dim();
    let eig = SymmetricEigen::new(a.0.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

pub fn spd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    sym_eig(a)?.rebuild(f64::sqrt)
}

pub fn spd_inv_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    sym_eig(a)?.rebuild(|v| 1.0 / v.sqrt())
}

pub fn spd_det(a: &SymMatrix) -> Result<f64> {
    det_from_eig(&sym_eig(a)?)
}

pub(crate) fn det_from_eig(eig: &EigenDecomposition) -> Result<f64> {
    let det: f64 = eig.clamped_eigenvalues()?.iter().product();
    if !det.is_finite() || det <= 0.0 {
        return Err(Error::NumericalRange(format!("determinant {det:e} out of range")));
    }
    Ok(det)
}

/// Replaces eigenvalues below the relative floor. Returns the input unchanged
/// (bit for bit) when no eigenvalue is below the floor.
pub fn spd_clamp(a: &SymMatrix) -> Result<(SymMatrix, EigenDecomposition)> {
    let eig = sym_eig(a)?;
    let lam = eig.clamped_eigenvalues()?;
    if eig.needs_clamp() {
        let rebuilt = eig.rebuild_with(&lam);
        Ok((rebuilt, eig))
    } else {
        Ok((a.clone(), eig))
    }
}

/// Square root and inverse square root from a single decomposition.
#[derive(Debug, Clone)]
pub struct SpdRoots {
    pub sqrt: SymMatrix,
    pub inv_sqrt: SymMatrix,
    pub eig_min: f64,
    pub eig_max: f64,
}

pub fn spd_roots(a: &SymMatrix) -> Result<SpdRoots> {
    let eig = sym_eig(a)?;
    let lam = eig.clamped_eigenvalues()?;
    Ok(SpdRoots {
        sqrt: eig.rebuild_with(&lam.map(f64::sqrt)),
        inv_sqrt: eig.rebuild_with(&lam.map(|v| 1.0 / v.sqrt())),
        eig_min: lam[0],
        eig_max: lam[lam.len() - 1],
    })
}
