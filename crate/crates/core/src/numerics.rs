//! Dense Hermitian spectral kernel.
//!
//! Every operator in the crate is carried as an [`OperatorMatrix`]. The
//! routines here are the only place that talks to the eigensolver: Hermitian
//! spectra, PSD square roots, Loewner-order tests, commutation tests, and the
//! bisection that extracts the largest `A` with `S - A P` positive
//! semidefinite.
//!
//! Tolerances are relative to the operator norm with a floor of one, so a
//! near-zero operator is judged on an absolute scale.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{FrameError, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Dense complex operator between finite-dimensional spaces.
///
/// Entries are always finite. Dereferences to the underlying
/// [`nalgebra::DMatrix`] for arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix(DMatrix<C64>);

impl OperatorMatrix {
    /// Builds an operator from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(FrameError::EntryCount {
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        for col in 0..matrix.ncols() {
            for row in 0..matrix.nrows() {
                let z = matrix[(row, col)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(FrameError::NonFinite { row, col });
                }
            }
        }
        Ok(Self(matrix))
    }

    /// Wraps a matrix produced by arithmetic on already-validated operators.
    pub(crate) fn wrap(matrix: DMatrix<C64>) -> Self {
        debug_assert!(matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Self(matrix)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(diagonal: &[f64]) -> Self {
        let n = diagonal.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diagonal[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Builds an operator from real rows. Panics on ragged input.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self(DMatrix::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.0.nrows() == self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Row-major copy of the entries, matching [`OperatorMatrix::new`].
    pub fn row_major_entries(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn compose(&self, rhs: &OperatorMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(FrameError::DimensionMismatch {
                context: "operator product",
                expected: self.cols(),
                actual: rhs.rows(),
            });
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub(crate) fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(FrameError::NonSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }
}

impl Deref for OperatorMatrix {
    type Target = DMatrix<C64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// Numerical tolerances shared by every verdict in the crate.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// PSD slack, relative to the spectral norm (floor 1).
    pub psd_tol: f64,
    /// Bisection stopping width on the scale parameter.
    pub bisect_tol: f64,
    /// Commutator and skew-part slack, relative to Frobenius norms.
    pub commute_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd_tol: 1e-9,
            bisect_tol: 1e-10,
            commute_tol: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn new(psd_tol: f64, bisect_tol: f64, commute_tol: f64) -> Result<Self> {
        let tol = Self {
            psd_tol,
            bisect_tol,
            commute_tol,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("psd_tol", self.psd_tol),
            ("bisect_tol", self.bisect_tol),
            ("commute_tol", self.commute_tol),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(FrameError::InvalidTolerance { name, value });
            }
        }
        Ok(())
    }
}

/// Eigendecomposition of a Hermitian operator with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<C64>,
    /// Frobenius norm of the skew part removed before solving.
    pub hermitian_residual: f64,
}

impl HermitianSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn spectral_norm(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    pub fn vector(&self, index: usize) -> CVector {
        self.eigenvectors.column(index).into_owned()
    }

    /// Rebuilds `V diag(f(lambda)) V*`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> OperatorMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(k).scale_mut(w);
        }
        let (h, _) = hermitize_matrix(&(scaled * v.adjoint()));
        OperatorMatrix::wrap(h)
    }
}

fn hermitize_matrix(m: &DMatrix<C64>) -> (DMatrix<C64>, f64) {
    let adj = m.adjoint();
    let herm = (m + &adj) * C64::new(0.5, 0.0);
    let skew = (m - &adj) * C64::new(0.5, 0.0);
    (herm, skew.norm())
}

/// Splits off the Hermitian part `(M + M*)/2` and reports `||(M - M*)/2||_F`.
pub fn hermitize(m: &OperatorMatrix) -> Result<(OperatorMatrix, f64)> {
    m.ensure_square()?;
    let (h, residual) = hermitize_matrix(m.matrix());
    Ok((OperatorMatrix::wrap(h), residual))
}

pub fn eig_hermitian(h: &OperatorMatrix, tol: &Tolerances) -> Result<HermitianSpectrum> {
    h.ensure_square()?;
    let (herm, residual) = hermitize_matrix(h.matrix());
    let limit = tol.commute_tol * h.frobenius_norm().max(1.0);
    if residual > limit {
        return Err(FrameError::SkewPart { residual, limit });
    }
    Ok(spectrum_of(herm, residual))
}

fn spectrum_of(herm: DMatrix<C64>, residual: f64) -> HermitianSpectrum {
    let n = herm.nrows();
    if n == 0 {
        return HermitianSpectrum {
            eigenvalues: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
            hermitian_residual: residual,
        };
    }
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianSpectrum {
        eigenvalues,
        eigenvectors,
        hermitian_residual: residual,
    }
}

/// Smallest eigenvalue of a matrix already known to be Hermitian.
fn lambda_min_unchecked(herm: &DMatrix<C64>) -> f64 {
    if herm.nrows() == 0 {
        return 0.0;
    }
    herm.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Spectral norm of a Hermitian operator.
pub fn hermitian_norm(h: &OperatorMatrix, tol: &Tolerances) -> Result<f64> {
    Ok(eig_hermitian(h, tol)?.spectral_norm())
}

/// The unique PSD square root, clamping eigenvalues inside `-psd_tol` to zero.
pub fn psd_sqrt(h: &OperatorMatrix, tol: &Tolerances) -> Result<OperatorMatrix> {
    let spec = eig_hermitian(h, tol)?;
    let limit = tol.psd_tol * spec.spectral_norm().max(1.0);
    if spec.min() < -limit {
        return Err(FrameError::NegativeEigenvalue {
            lambda_min: spec.min(),
            limit,
        });
    }
    Ok(spec.map_eigenvalues(|lambda| lambda.max(0.0).sqrt()))
}

fn ensure_same_square(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<usize> {
    let n = a.ensure_square()?;
    let m = b.ensure_square()?;
    if n != m {
        return Err(FrameError::DimensionMismatch {
            context: "operator pair",
            expected: n,
            actual: m,
        });
    }
    Ok(n)
}

/// `T1 <= T2` in the Loewner order, up to `psd_tol`.
pub fn loewner_leq(t1: &OperatorMatrix, t2: &OperatorMatrix, tol: &Tolerances) -> Result<bool> {
    ensure_same_square(t1, t2)?;
    let diff = OperatorMatrix::wrap(t2.matrix() - t1.matrix());
    let gap = eig_hermitian(&diff, tol)?.min();
    let scale = hermitian_norm(t1, tol)?
        .max(hermitian_norm(t2, tol)?)
        .max(1.0);
    Ok(gap >= -tol.psd_tol * scale)
}

/// Frobenius norm of `AB - BA`.
pub fn commutator_norm(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    ensure_same_square(a, b)?;
    let ab = a.matrix() * b.matrix();
    let ba = b.matrix() * a.matrix();
    Ok((ab - ba).norm())
}

pub fn commutes(a: &OperatorMatrix, b: &OperatorMatrix, tol: &Tolerances) -> Result<bool> {
    let c = commutator_norm(a, b)?;
    Ok(c <= tol.commute_tol * a.frobenius_norm() * b.frobenius_norm())
}

/// Result of [`max_scale_psd`].
#[derive(Clone, Debug)]
pub struct ScaleBound {
    /// Largest feasible scale found (lower end of the final bracket).
    pub value: f64,
    /// Infeasible upper end of the final bracket.
    pub upper_bracket: f64,
    /// Unit eigenvector of the most negative direction of `S - upper_bracket * P`.
    pub witness: CVector,
    pub iterations: usize,
}

const MAX_BISECTION_STEPS: usize = 400;

/// Largest `A >= 0` with `S - A P` positive semidefinite.
///
/// `lambda_min(S - A P)` is non-increasing in `A`, so the feasible set is an
/// interval `[0, A*]` and bisection brackets `A*`. A direction in the kernel
/// of `P` only constrains `S` itself, so feasibility is measured against
/// `min(lambda_min(S), 0)` with a machine-precision slack.
pub fn max_scale_psd(s: &OperatorMatrix, p: &OperatorMatrix, tol: &Tolerances) -> Result<ScaleBound> {
    let n = ensure_same_square(s, p)?;
    let spec_s = eig_hermitian(s, tol)?;
    let spec_p = eig_hermitian(p, tol)?;
    let norm_s = spec_s.spectral_norm();
    let norm_p = spec_p.spectral_norm();

    if norm_p <= tol.psd_tol {
        return Err(FrameError::ZeroOperator { norm: norm_p });
    }
    for spec in [&spec_p, &spec_s] {
        let limit = tol.psd_tol * spec.spectral_norm().max(1.0);
        if spec.min() < -limit {
            return Err(FrameError::NegativeEigenvalue {
                lambda_min: spec.min(),
                limit,
            });
        }
    }

    let active_floor = tol.psd_tol * norm_p;
    let p_plus = spec_p
        .eigenvalues
        .iter()
        .copied()
        .find(|&lambda| lambda > active_floor)
        .unwrap_or(norm_p);

    let (s_herm, _) = hermitize_matrix(s.matrix());
    let (p_herm, _) = hermitize_matrix(p.matrix());
    let baseline = spec_s.min().min(0.0);
    let slack = |a: f64| 1e3 * f64::EPSILON * (norm_s + a * norm_p + 1.0) * (n.max(1) as f64);
    let shifted = |a: f64| &s_herm - &p_herm * C64::new(a, 0.0);
    let feasible = |a: f64| lambda_min_unchecked(&shifted(a)) >= baseline - slack(a);

    let mut lo = 0.0_f64;
    let mut hi = (spec_s.max() + 1.0) / p_plus;
    let mut iterations = 0;
    if !feasible(lo) {
        // Only reachable when the slack is too tight for the eigensolver; the
        // bracket [0, 0] is then the honest answer.
        hi = 0.0;
    }
    while hi - lo > tol.bisect_tol * (1.0 + hi) && iterations < MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let witness_spec = spectrum_of(shifted(hi.max(lo)), 0.0);
    Ok(ScaleBound {
        value: lo,
        upper_bracket: hi,
        witness: witness_spec.vector(0),
        iterations,
    })
}

/// Inner product linear in the first slot: `<x, y> = sum x_i conj(y_i)`.
pub fn inner(x: &CVector, y: &CVector) -> C64 {
    y.dotc(x)
}

pub fn norm_sq(x: &CVector) -> f64 {
    x.norm_squared()
}
