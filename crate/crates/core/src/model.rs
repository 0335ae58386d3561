//! Validated domain types: g-frame families, control pairs, `K` operators,
//! and the single and woven instances the bounds are certified for.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{FrameError, Result};
use crate::numerics::{
    commutator_norm, commutes, eig_hermitian, hermitize, psd_sqrt, CVector, OperatorMatrix,
    Tolerances,
};

/// Exhaustive enumeration visits `2^m` subsets; beyond this only sampling is offered.
pub const EXHAUSTIVE_CAP: usize = 20;

/// Subsets are stored as `u64` masks.
pub const MAX_MEMBERS: usize = 64;

/// Finite stand-in for the ambient Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    dim: usize,
}

impl HilbertSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(FrameError::InvalidParameter("ambient dimension must be at least 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Finite sequence of operators `Lambda_j : H -> H_j`.
///
/// Member `j` is a `d_j x n` matrix; `d_j` is the dimension of its codomain.
#[derive(Clone, Debug, PartialEq)]
pub struct GFrameFamily {
    ambient_dim: usize,
    members: Vec<OperatorMatrix>,
}

impl GFrameFamily {
    pub fn new(ambient_dim: usize, members: Vec<OperatorMatrix>) -> Result<Self> {
        if members.is_empty() {
            return Err(FrameError::InvalidParameter("a family needs at least one member".into()));
        }
        if members.len() > MAX_MEMBERS {
            return Err(FrameError::InvalidParameter(format!(
                "at most {MAX_MEMBERS} members are supported, got {}",
                members.len()
            )));
        }
        for member in &members {
            if member.cols() != ambient_dim {
                return Err(FrameError::DimensionMismatch {
                    context: "family member domain",
                    expected: ambient_dim,
                    actual: member.cols(),
                });
            }
            if member.rows() == 0 {
                return Err(FrameError::InvalidParameter("member codomain must be non-trivial".into()));
            }
        }
        Ok(Self {
            ambient_dim,
            members,
        })
    }

    /// Rank-one family `f -> <f, f_j>` from a list of vectors.
    pub fn from_vectors(vectors: &[CVector]) -> Result<Self> {
        let n = vectors.first().map_or(0, |v| v.len());
        let members = vectors
            .iter()
            .map(|v| {
                if v.len() != n {
                    return Err(FrameError::DimensionMismatch {
                        context: "vector family",
                        expected: n,
                        actual: v.len(),
                    });
                }
                OperatorMatrix::from_matrix(DMatrix::from_fn(1, v.len(), |_, c| v[c].conj()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, members)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[OperatorMatrix] {
        &self.members
    }

    pub fn member(&self, index: usize) -> &OperatorMatrix {
        &self.members[index]
    }

    pub fn codomain_dims(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.rows()).collect()
    }

    /// `sum_j Lambda_j^* Lambda_j`.
    pub fn gram_sum(&self) -> OperatorMatrix {
        let n = self.ambient_dim;
        let mut acc = nalgebra::DMatrix::zeros(n, n);
        for member in &self.members {
            acc += member.ad_mul(member.matrix());
        }
        OperatorMatrix::wrap(acc)
    }

    pub fn with_member(&self, member: OperatorMatrix) -> Result<Self> {
        let mut members = self.members.clone();
        members.push(member);
        Self::new(self.ambient_dim, members)
    }
}

/// Verdict of [`validate_gl_plus`]: the constants `m`, `M` with `mI <= u <= MI`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlPlusVerdict {
    pub ok: bool,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub hermitian_residual: f64,
}

/// Checks that `m` is Hermitian and positive invertible.
pub fn validate_gl_plus(m: &OperatorMatrix, tol: &Tolerances) -> Result<GlPlusVerdict> {
    let (herm, residual) = hermitize(m)?;
    let spectrum = eig_hermitian(&herm, tol)?;
    let symmetric = residual <= tol.commute_tol * m.frobenius_norm().max(1.0);
    let lambda_min = spectrum.min();
    let lambda_max = spectrum.max();
    Ok(GlPlusVerdict {
        ok: symmetric && lambda_min > tol.psd_tol * lambda_max.max(1.0),
        lambda_min,
        lambda_max,
        hermitian_residual: residual,
    })
}

/// The pair `(C, C')` together with the cached root `(CC')^{1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPair {
    c: OperatorMatrix,
    c_prime: OperatorMatrix,
    sqrt_product: OperatorMatrix,
}

impl ControlPair {
    pub fn new(c: OperatorMatrix, c_prime: OperatorMatrix, tol: &Tolerances) -> Result<Self> {
        for (which, op) in [("C", &c), ("C'", &c_prime)] {
            let verdict = validate_gl_plus(op, tol)?;
            if !verdict.ok {
                return Err(FrameError::NotGlPlus {
                    which,
                    residual: verdict.hermitian_residual,
                    lambda_min: verdict.lambda_min,
                });
            }
        }
        if c.rows() != c_prime.rows() {
            return Err(FrameError::DimensionMismatch {
                context: "control pair",
                expected: c.rows(),
                actual: c_prime.rows(),
            });
        }
        if !commutes(&c, &c_prime, tol)? {
            return Err(FrameError::NonCommutingControls {
                commutator: commutator_norm(&c, &c_prime)?,
            });
        }
        let (product, _) = hermitize(&c.compose(&c_prime)?)?;
        let sqrt_product = psd_sqrt(&product, tol)?;
        Ok(Self {
            c,
            c_prime,
            sqrt_product,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            c: OperatorMatrix::identity(n),
            c_prime: OperatorMatrix::identity(n),
            sqrt_product: OperatorMatrix::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.rows()
    }

    pub fn c(&self) -> &OperatorMatrix {
        &self.c
    }

    pub fn c_prime(&self) -> &OperatorMatrix {
        &self.c_prime
    }

    /// `(CC')^{1/2}`.
    pub fn sqrt_product(&self) -> &OperatorMatrix {
        &self.sqrt_product
    }

    /// Whether a Hermitian operator commutes with both controls.
    pub fn commutes_with(&self, op: &OperatorMatrix, tol: &Tolerances) -> Result<bool> {
        Ok(commutes(op, &self.c, tol)? && commutes(op, &self.c_prime, tol)?)
    }
}

/// The operator `K` of the lower frame condition, with cached `KK^*`.
#[derive(Clone, Debug, PartialEq)]
pub struct KOperator {
    k: OperatorMatrix,
    kk_star: OperatorMatrix,
}

impl KOperator {
    pub fn new(k: OperatorMatrix) -> Result<Self> {
        k.ensure_square()?;
        let (kk_star, _) = hermitize(&OperatorMatrix::wrap(k.matrix() * k.adjoint().matrix()))?;
        Ok(Self { k, kk_star })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            k: OperatorMatrix::identity(n),
            kk_star: OperatorMatrix::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.k.rows()
    }

    pub fn k(&self) -> &OperatorMatrix {
        &self.k
    }

    pub fn kk_star(&self) -> &OperatorMatrix {
        &self.kk_star
    }

    /// `||K^* f||^2`.
    pub fn lower_energy(&self, f: &CVector) -> f64 {
        self.k.ad_mul(f).norm_squared()
    }

    pub fn is_zero(&self, tol: &Tolerances) -> bool {
        self.k.frobenius_norm() <= tol.psd_tol
    }
}

/// A family with controls and `K`: the object a frame inequality is asserted about.
#[derive(Clone, Debug)]
pub struct ControlledInstance {
    space: HilbertSpec,
    family: GFrameFamily,
    controls: ControlPair,
    k_op: KOperator,
    gram_sum: OperatorMatrix,
    commutation_ok: bool,
}

impl ControlledInstance {
    pub fn from_parts(
        family: GFrameFamily,
        controls: ControlPair,
        k_op: KOperator,
        tol: &Tolerances,
    ) -> Result<Self> {
        let gram_sum = family.gram_sum();
        Self::with_gram(family, controls, k_op, gram_sum, tol)
    }

    pub(crate) fn with_gram(
        family: GFrameFamily,
        controls: ControlPair,
        k_op: KOperator,
        gram_sum: OperatorMatrix,
        tol: &Tolerances,
    ) -> Result<Self> {
        let n = family.ambient_dim();
        let space = HilbertSpec::new(n)?;
        for (context, actual) in [("control dimension", controls.dim()), ("K dimension", k_op.dim())] {
            if actual != n {
                return Err(FrameError::DimensionMismatch {
                    context,
                    expected: n,
                    actual,
                });
            }
        }
        let commutation_ok = controls.commutes_with(&gram_sum, tol)?;
        Ok(Self {
            space,
            family,
            controls,
            k_op,
            gram_sum,
            commutation_ok,
        })
    }

    pub fn space(&self) -> HilbertSpec {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn family(&self) -> &GFrameFamily {
        &self.family
    }

    pub fn controls(&self) -> &ControlPair {
        &self.controls
    }

    pub fn k_op(&self) -> &KOperator {
        &self.k_op
    }

    /// `S_Lambda = sum_j Lambda_j^* Lambda_j` (uncontrolled).
    pub fn gram_sum(&self) -> &OperatorMatrix {
        &self.gram_sum
    }

    /// Whether `S_Lambda` commutes with `C` and `C'`.
    pub fn commutation_ok(&self) -> bool {
        self.commutation_ok
    }
}

/// Validates the controls and assembles a [`ControlledInstance`].
pub fn build_controlled_instance(
    family: GFrameFamily,
    c: OperatorMatrix,
    c_prime: OperatorMatrix,
    k: OperatorMatrix,
    tol: &Tolerances,
) -> Result<ControlledInstance> {
    let n = family.ambient_dim();
    for (context, op) in [("C", &c), ("C'", &c_prime), ("K", &k)] {
        if op.rows() != n || op.cols() != n {
            return Err(FrameError::DimensionMismatch {
                context,
                expected: n,
                actual: if op.rows() != n { op.rows() } else { op.cols() },
            });
        }
    }
    let controls = ControlPair::new(c, c_prime, tol)?;
    ControlledInstance::from_parts(family, controls, KOperator::new(k)?, tol)
}

/// Subset `sigma` of the member indices, as a bitmask.
///
/// Bit `j` (0-based) set means member `j` is drawn from `Lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset {
    bits: u64,
    width: usize,
}

impl Subset {
    pub fn new(bits: u64, width: usize) -> Result<Self> {
        if width > MAX_MEMBERS {
            return Err(FrameError::InvalidParameter(format!(
                "subset width {width} exceeds {MAX_MEMBERS}"
            )));
        }
        if bits & !Self::mask(width) != 0 {
            return Err(FrameError::InvalidParameter(format!(
                "mask {bits:#x} has bits beyond width {width}"
            )));
        }
        Ok(Self { bits, width })
    }

    fn mask(width: usize) -> u64 {
        if width >= 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        }
    }

    pub fn empty(width: usize) -> Self {
        Self { bits: 0, width }
    }

    pub fn full(width: usize) -> Self {
        Self {
            bits: Self::mask(width),
            width,
        }
    }

    /// From 1-based member indices.
    pub fn from_indices(indices: &[usize], width: usize) -> Result<Self> {
        let mut bits = 0u64;
        for &i in indices {
            if i == 0 || i > width {
                return Err(FrameError::InvalidParameter(format!(
                    "subset index {i} outside 1..={width}"
                )));
            }
            bits |= 1 << (i - 1);
        }
        Self::new(bits, width)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Whether 0-based member `j` is taken from `Lambda`.
    pub fn contains(&self, j: usize) -> bool {
        j < self.width && (self.bits >> j) & 1 == 1
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: !self.bits & Self::mask(self.width),
            width: self.width,
        }
    }

    /// 1-based indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.width).filter(|&j| self.contains(j)).map(|j| j + 1).collect()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Two families sharing `(C, C', K)`; `sigma` ranges over their common index set.
#[derive(Clone, Debug, PartialEq)]
pub struct WeavingInstance {
    lambda: GFrameFamily,
    omega: GFrameFamily,
    controls: ControlPair,
    k_op: KOperator,
}

impl WeavingInstance {
    pub fn new(
        lambda: GFrameFamily,
        omega: GFrameFamily,
        controls: ControlPair,
        k_op: KOperator,
    ) -> Result<Self> {
        if lambda.member_count() != omega.member_count() {
            return Err(FrameError::DimensionMismatch {
                context: "weaving member count",
                expected: lambda.member_count(),
                actual: omega.member_count(),
            });
        }
        let n = lambda.ambient_dim();
        for (context, actual) in [
            ("omega ambient dimension", omega.ambient_dim()),
            ("control dimension", controls.dim()),
            ("K dimension", k_op.dim()),
        ] {
            if actual != n {
                return Err(FrameError::DimensionMismatch {
                    context,
                    expected: n,
                    actual,
                });
            }
        }
        Ok(Self {
            lambda,
            omega,
            controls,
            k_op,
        })
    }

    pub fn lambda(&self) -> &GFrameFamily {
        &self.lambda
    }

    pub fn omega(&self) -> &GFrameFamily {
        &self.omega
    }

    pub fn controls(&self) -> &ControlPair {
        &self.controls
    }

    pub fn k_op(&self) -> &KOperator {
        &self.k_op
    }

    pub fn member_count(&self) -> usize {
        self.lambda.member_count()
    }

    pub fn ambient_dim(&self) -> usize {
        self.lambda.ambient_dim()
    }

    fn check_width(&self, sigma: &Subset) -> Result<()> {
        if sigma.width() != self.member_count() {
            return Err(FrameError::SubsetWidth {
                expected: self.member_count(),
                actual: sigma.width(),
            });
        }
        Ok(())
    }

    /// `{Lambda_j}_{j in sigma} U {Omega_j}_{j not in sigma}`, in index order.
    pub fn subfamily(&self, sigma: &Subset) -> Result<GFrameFamily> {
        self.check_width(sigma)?;
        let members = (0..self.member_count())
            .map(|j| {
                if sigma.contains(j) {
                    self.lambda.member(j).clone()
                } else {
                    self.omega.member(j).clone()
                }
            })
            .collect();
        GFrameFamily::new(self.ambient_dim(), members)
    }

    pub fn mixed_instance(&self, sigma: &Subset, tol: &Tolerances) -> Result<ControlledInstance> {
        ControlledInstance::from_parts(self.subfamily(sigma)?, self.controls.clone(), self.k_op.clone(), tol)
    }

    pub fn lambda_instance(&self, tol: &Tolerances) -> Result<ControlledInstance> {
        ControlledInstance::from_parts(self.lambda.clone(), self.controls.clone(), self.k_op.clone(), tol)
    }

    pub fn omega_instance(&self, tol: &Tolerances) -> Result<ControlledInstance> {
        ControlledInstance::from_parts(self.omega.clone(), self.controls.clone(), self.k_op.clone(), tol)
    }
}

/// Non-fatal conditions attached to a certificate.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Advisory {
    /// `K = 0`: the lower condition holds for every `A`.
    VacuousLowerBound,
    /// The controlled frame operator had a skew part before hermitization.
    SkewFrameOperator { residual: f64 },
    /// Only a sample of subsets was evaluated.
    SampledNotExhaustive { evaluated: usize },
}

/// Optimal lower/upper bounds with the vectors that attain them.
#[derive(Clone, Debug)]
pub struct BoundCertificate {
    /// Optimal `A`; `+inf` when [`Advisory::VacuousLowerBound`] is attached.
    pub lower: f64,
    pub upper: f64,
    /// Unit vector with near-extremal ratio; `None` when the lower bound is vacuous.
    pub lower_witness: Option<CVector>,
    pub upper_witness: CVector,
    pub worst_subset: Option<Subset>,
    /// Frame verdict (woven verdict for weaving certificates).
    pub is_frame: bool,
    pub advisories: Vec<Advisory>,
}
