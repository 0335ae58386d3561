//! Synthesis, analysis and frame operators of a controlled instance.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{FrameError, Result};
use crate::model::{ControlledInstance, GFrameFamily};
use crate::numerics::{eig_hermitian, hermitize, CVector, OperatorMatrix, Tolerances, C64};

/// Block coordinates of the direct sum `H_1 (+) ... (+) H_m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GBasisLayout {
    offsets: Vec<usize>,
}

impl GBasisLayout {
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        offsets.push(0);
        for &d in dims {
            if d == 0 {
                return Err(FrameError::InvalidParameter("block dimension must be positive".into()));
            }
            offsets.push(offsets.last().copied().unwrap_or(0) + d);
        }
        Ok(Self { offsets })
    }

    pub fn for_family(family: &GFrameFamily) -> Self {
        Self::from_dims(&family.codomain_dims()).expect("family members have non-empty codomains")
    }

    pub fn member_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dims(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn block(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    /// `Xi_j^* g`: places `g` in block `j` of an otherwise zero vector.
    pub fn embed(&self, j: usize, g: &CVector) -> CVector {
        let range = self.block(j);
        assert_eq!(g.len(), range.len(), "block size mismatch");
        let mut out = CVector::zeros(self.total());
        out.rows_mut(range.start, range.len()).copy_from(g);
        out
    }

    /// `Xi_j x`: the `j`-th block of `x`.
    pub fn extract(&self, j: usize, x: &CVector) -> CVector {
        let range = self.block(j);
        x.rows(range.start, range.len()).into_owned()
    }

    /// Concatenates blocks into one direct-sum vector.
    pub fn concat(&self, blocks: &[CVector]) -> CVector {
        let mut out = CVector::zeros(self.total());
        for (j, b) in blocks.iter().enumerate() {
            out.rows_mut(self.offsets[j], b.len()).copy_from(b);
        }
        out
    }
}

/// `S_(C,C')` together with consistency diagnostics.
#[derive(Clone, Debug)]
pub struct FrameOperator {
    /// Hermitian part of `C' (sum Lambda_j^* Lambda_j) C`.
    pub matrix: OperatorMatrix,
    /// Skew part removed by hermitization.
    pub hermitian_residual: f64,
    /// `|| herm(T T^*) - matrix ||_F`: the two definitions agree only under commutation.
    pub factorization_gap: f64,
}

fn controlled_gram(inst: &ControlledInstance) -> (OperatorMatrix, f64) {
    let c = inst.controls().c().matrix();
    let cp = inst.controls().c_prime().matrix();
    let raw = OperatorMatrix::wrap(cp * inst.gram_sum().matrix() * c);
    hermitize(&raw).expect("square by construction")
}

fn factorized_gram(inst: &ControlledInstance) -> OperatorMatrix {
    let r = inst.controls().sqrt_product().matrix();
    let t = OperatorMatrix::wrap(r * inst.gram_sum().matrix() * r);
    hermitize(&t).expect("square by construction").0
}

pub fn frame_operator(inst: &ControlledInstance) -> FrameOperator {
    let (matrix, hermitian_residual) = controlled_gram(inst);
    let factorization_gap = (factorized_gram(inst).matrix() - matrix.matrix()).norm();
    FrameOperator {
        matrix,
        hermitian_residual,
        factorization_gap,
    }
}

/// Synthesis operator: column block `j` is `(CC')^{1/2} Lambda_j^*`.
pub fn synthesis_matrix(inst: &ControlledInstance, layout: &GBasisLayout) -> Result<OperatorMatrix> {
    let family = inst.family();
    if layout.dims() != family.codomain_dims() {
        return Err(FrameError::InvalidParameter("layout does not match family codomains".into()));
    }
    let n = inst.dim();
    let r = inst.controls().sqrt_product().matrix();
    let mut t = DMatrix::zeros(n, layout.total());
    for (j, member) in family.members().iter().enumerate() {
        let range = layout.block(j);
        let block = r * member.adjoint().matrix();
        t.columns_mut(range.start, range.len()).copy_from(&block);
    }
    Ok(OperatorMatrix::wrap(t))
}

fn ensure_vector_dim(inst: &ControlledInstance, f: &CVector) -> Result<()> {
    if f.len() != inst.dim() {
        return Err(FrameError::DimensionMismatch {
            context: "vector",
            expected: inst.dim(),
            actual: f.len(),
        });
    }
    Ok(())
}

/// Analysis operator: blocks `Lambda_j (CC')^{1/2} f`.
pub fn analysis_apply(inst: &ControlledInstance, f: &CVector) -> Result<Vec<CVector>> {
    ensure_vector_dim(inst, f)?;
    let rf = inst.controls().sqrt_product().matrix() * f;
    Ok(inst.family().members().iter().map(|m| m.matrix() * &rf).collect())
}

/// Value of `sum_j <Lambda_j C f, Lambda_j C' f>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticForm {
    /// Real part.
    pub value: f64,
    /// Imaginary part; zero in exact arithmetic under the commutation assumption.
    pub imaginary: f64,
    /// Set when the imaginary part exceeds `1e-9 (1 + ||f||^2)`.
    pub advisory: bool,
}

pub fn quadratic_form(inst: &ControlledInstance, f: &CVector) -> Result<QuadraticForm> {
    ensure_vector_dim(inst, f)?;
    let cf = inst.controls().c().matrix() * f;
    let cpf = inst.controls().c_prime().matrix() * f;
    let mut total = C64::new(0.0, 0.0);
    for member in inst.family().members() {
        let a = member.matrix() * &cf;
        let b = member.matrix() * &cpf;
        total += crate::numerics::inner(&a, &b);
    }
    let imaginary = total.im;
    Ok(QuadraticForm {
        value: total.re,
        imaginary,
        advisory: imaginary.abs() > 1e-9 * (1.0 + f.norm_squared()),
    })
}

/// `sum_j f_j f_j^*` of a vector family.
pub fn vector_frame_operator(vectors: &[CVector]) -> Result<OperatorMatrix> {
    let n = vectors.first().map(|v| v.len()).ok_or_else(|| {
        FrameError::InvalidParameter("vector family must be non-empty".into())
    })?;
    let mut s = DMatrix::zeros(n, n);
    for v in vectors {
        if v.len() != n {
            return Err(FrameError::DimensionMismatch {
                context: "vector family",
                expected: n,
                actual: v.len(),
            });
        }
        s += v * v.adjoint();
    }
    Ok(OperatorMatrix::wrap(s))
}

/// Canonical-dual reconstruction `f = sum_j <f, S^{-1} f_j> f_j`.
pub fn classical_reconstruct(vectors: &[CVector], f: &CVector) -> Result<CVector> {
    let s = vector_frame_operator(vectors)?;
    if f.len() != s.rows() {
        return Err(FrameError::DimensionMismatch {
            context: "vector",
            expected: s.rows(),
            actual: f.len(),
        });
    }
    let tol = Tolerances::default();
    let spectrum = eig_hermitian(&s, &tol)?;
    if spectrum.min() <= tol.psd_tol * spectrum.max().max(1.0) {
        return Err(FrameError::SingularFrameOperator {
            lambda_min: spectrum.min(),
        });
    }
    let s_inv = spectrum.map_eigenvalues(|lambda| 1.0 / lambda);
    let mut out = CVector::zeros(f.len());
    for v in vectors {
        let dual = s_inv.matrix() * v;
        let coefficient = dual.dotc(f);
        out += v * coefficient;
    }
    Ok(out)
}
