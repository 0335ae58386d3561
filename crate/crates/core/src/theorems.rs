//! Executable checkers for the weaving theorems.
//!
//! Each checker tests the theorem's hypotheses numerically, states the
//! conclusion it would license (claimed universal bounds), and, when the
//! instance is small enough, runs the exhaustive weaving oracle to confirm the
//! claim. A checker never reports a claim when a hypothesis fails.
//!
//! All proofs rewrite `<Lambda_j C f, Lambda_j C' f>` as
//! `||Lambda_j (CC')^{1/2} f||^2`, which is valid when each member Gram
//! operator commutes with the controls. That per-member condition is checked
//! as the first hypothesis of every theorem.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::optimal_bounds;
use crate::error::{FrameError, Result};
use crate::frame_ops::{analysis_apply, frame_operator, synthesis_matrix, GBasisLayout};
use crate::model::{ControlPair, GFrameFamily, KOperator, Subset, WeavingInstance, EXHAUSTIVE_CAP};
use crate::numerics::{eig_hermitian, hermitize, loewner_leq, CVector, OperatorMatrix, Tolerances, C64};
use crate::weaving::{all_subsets, universal_bounds_exhaustive, SubsetEvaluator, WeavingCertificate};

/// Slack used when comparing oracle bounds with claimed bounds.
pub const CLAIM_SLACK: f64 = 1e-6;

/// Relative tolerance for the exact identities a hypothesis asserts.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    BesselSum,
    Characterization,
    Perturbation,
    CrossSynthesis,
    Atomic,
    PositiveGap,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::BesselSum,
        TheoremId::Characterization,
        TheoremId::Perturbation,
        TheoremId::CrossSynthesis,
        TheoremId::Atomic,
        TheoremId::PositiveGap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TheoremId::BesselSum => "bessel-sum",
            TheoremId::Characterization => "characterization",
            TheoremId::Perturbation => "perturbation",
            TheoremId::CrossSynthesis => "cross-synthesis",
            TheoremId::Atomic => "atomic",
            TheoremId::PositiveGap => "positive-gap",
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Hypothesis {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

impl Hypothesis {
    fn new(name: &'static str, holds: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            holds,
            detail: detail.into(),
        }
    }
}

/// What the exhaustive oracle found.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct OracleSummary {
    pub woven: Option<bool>,
    pub lower: Option<f64>,
    pub upper: f64,
    pub worst_subset: Option<Vec<usize>>,
}

impl From<&WeavingCertificate> for OracleSummary {
    fn from(cert: &WeavingCertificate) -> Self {
        Self {
            woven: Some(cert.woven),
            lower: Some(cert.certificate.lower),
            upper: cert.certificate.upper,
            worst_subset: cert.certificate.worst_subset.map(|s| s.indices()),
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    pub hypotheses: Vec<Hypothesis>,
    pub hypotheses_hold: bool,
    /// Whether the conclusion asserts wovenness (the Bessel-sum result only bounds from above).
    pub claims_woven: bool,
    pub claimed_lower: f64,
    pub claimed_upper: f64,
    pub oracle: Option<OracleSummary>,
    /// Set only when the oracle ran.
    pub oracle_agrees: Option<bool>,
    pub notes: Vec<String>,
}

impl TheoremReport {
    fn new(theorem: TheoremId, hypotheses: Vec<Hypothesis>) -> Self {
        let hypotheses_hold = hypotheses.iter().all(|h| h.holds);
        Self {
            theorem,
            hypotheses,
            hypotheses_hold,
            claims_woven: false,
            claimed_lower: 0.0,
            claimed_upper: f64::INFINITY,
            oracle: None,
            oracle_agrees: None,
            notes: Vec::new(),
        }
    }

    fn claim(&mut self, lower: f64, upper: f64, woven: bool, tol: &Tolerances) {
        if self.hypotheses_hold {
            self.claimed_lower = lower;
            self.claimed_upper = upper;
            self.claims_woven = woven && lower > 2.0 * tol.psd_tol;
        }
    }

    /// Oracle bounds inside the claimed interval, and woven whenever claimed.
    fn judge(&mut self, oracle: OracleSummary) {
        let agrees = if self.hypotheses_hold {
            let lower_ok = oracle
                .lower
                .map_or(true, |a| a >= self.claimed_lower - slack(self.claimed_lower));
            let upper_ok = oracle.upper <= self.claimed_upper + slack(self.claimed_upper);
            let woven_ok = !self.claims_woven || oracle.woven == Some(true);
            lower_ok && upper_ok && woven_ok
        } else {
            true
        };
        self.oracle = Some(oracle);
        self.oracle_agrees = Some(agrees);
    }

    pub fn failed_hypotheses(&self) -> Vec<&'static str> {
        self.hypotheses.iter().filter(|h| !h.holds).map(|h| h.name).collect()
    }
}

fn slack(value: f64) -> f64 {
    if value.is_finite() {
        CLAIM_SLACK * value.abs().max(1.0)
    } else {
        0.0
    }
}

fn ensure_under_cap(w: &WeavingInstance) -> Result<()> {
    if w.member_count() > EXHAUSTIVE_CAP {
        return Err(FrameError::CapExceeded {
            members: w.member_count(),
            cap: EXHAUSTIVE_CAP,
        });
    }
    Ok(())
}

/// Every member Gram `Lambda_j^* Lambda_j`, `Omega_j^* Omega_j` commutes with `C` and `C'`.
pub fn standing_commutation(w: &WeavingInstance, tol: &Tolerances) -> Result<Hypothesis> {
    for (side, family) in [("lambda", w.lambda()), ("omega", w.omega())] {
        for (j, member) in family.members().iter().enumerate() {
            let gram = OperatorMatrix::wrap(member.ad_mul(member.matrix()));
            if !w.controls().commutes_with(&gram, tol)? {
                return Ok(Hypothesis::new(
                    "standing-commutation",
                    false,
                    format!("{side} member {} does not commute with the controls", j + 1),
                ));
            }
        }
    }
    Ok(Hypothesis::new("standing-commutation", true, "all member Grams commute with C and C'"))
}

/// Exhaustive oracle; `None` when some mixture violates the commutation assumption.
fn oracle(w: &WeavingInstance, tol: &Tolerances, notes: &mut Vec<String>) -> Result<Option<WeavingCertificate>> {
    if w.member_count() > EXHAUSTIVE_CAP {
        notes.push(format!("oracle skipped: {} members exceed the cap", w.member_count()));
        return Ok(None);
    }
    match universal_bounds_exhaustive(w, tol) {
        Ok(cert) => Ok(Some(cert)),
        Err(FrameError::CommutationAssumption) => {
            notes.push("oracle skipped: a mixed family violates the commutation assumption".into());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Upper bound `lambda_max` of the controlled frame operator of a family.
fn upper_bound(family: &GFrameFamily, w: &WeavingInstance, tol: &Tolerances) -> Result<f64> {
    let inst = crate::model::ControlledInstance::from_parts(family.clone(), w.controls().clone(), w.k_op().clone(), tol)?;
    Ok(eig_hermitian(&frame_operator(&inst).matrix, tol)?.max())
}

/// Optimal `(A, B)` of a component family, or `None` when the commutation assumption fails.
fn component_bounds(family: &GFrameFamily, w: &WeavingInstance, tol: &Tolerances) -> Result<Option<(f64, f64)>> {
    let inst = crate::model::ControlledInstance::from_parts(family.clone(), w.controls().clone(), w.k_op().clone(), tol)?;
    match optimal_bounds(&inst, tol) {
        Ok(cert) => Ok(Some((cert.lower, cert.upper))),
        Err(FrameError::CommutationAssumption) => Ok(None),
        Err(e) => Err(e),
    }
}

fn k_frame_hypothesis(name: &'static str, bounds: Option<(f64, f64)>, tol: &Tolerances) -> Hypothesis {
    match bounds {
        Some((a, b)) => Hypothesis::new(name, a > tol.psd_tol, format!("optimal bounds ({a:.12}, {b:.12})")),
        None => Hypothesis::new(name, false, "commutation assumption fails"),
    }
}

/// Every mixed family is Bessel with bound `B_1 + B_2`.
pub fn check_bessel_sum(w: &WeavingInstance, tol: &Tolerances) -> Result<TheoremReport> {
    ensure_under_cap(w)?;
    let b1 = upper_bound(w.lambda(), w, tol)?;
    let b2 = upper_bound(w.omega(), w, tol)?;
    let hypotheses = vec![
        standing_commutation(w, tol)?,
        Hypothesis::new("bessel", b1.is_finite() && b2.is_finite(), format!("B1 = {b1:.12}, B2 = {b2:.12}")),
    ];
    let mut report = TheoremReport::new(TheoremId::BesselSum, hypotheses);
    report.claim(0.0, b1 + b2, false, tol);

    let evaluator = SubsetEvaluator::new(w);
    let mut max_upper = f64::NEG_INFINITY;
    let mut violations = 0usize;
    let bound = b1 + b2;
    for sigma in all_subsets(w.member_count())? {
        let fo = frame_operator(&evaluator.instance(&sigma, tol)?);
        let upper = eig_hermitian(&fo.matrix, tol)?.max();
        if upper > bound + tol.psd_tol * bound.max(1.0) {
            violations += 1;
        }
        max_upper = max_upper.max(upper);
    }
    report.notes.push(format!("{violations} subsets exceed B1 + B2"));
    report.judge(OracleSummary {
        woven: None,
        lower: None,
        upper: max_upper,
        worst_subset: None,
    });
    if report.hypotheses_hold && violations > 0 {
        report.oracle_agrees = Some(false);
    }
    Ok(report)
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// Largest deviation of `U_sigma^* f` from the stacked analysis blocks, over `probes` random `f`.
pub fn adjoint_residual(w: &WeavingInstance, sigma: &Subset, probes: usize, seed: u64, tol: &Tolerances) -> Result<f64> {
    let inst = w.mixed_instance(sigma, tol)?;
    let layout = GBasisLayout::for_family(inst.family());
    let u = synthesis_matrix(&inst, &layout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ sigma.bits());
    let mut worst = 0.0_f64;
    for _ in 0..probes {
        let f = random_vector(w.ambient_dim(), &mut rng);
        let via_adjoint = u.ad_mul(&f);
        let blocks = analysis_apply(&inst, &f)?;
        let via_blocks = layout.concat(&blocks);
        worst = worst.max((via_adjoint - via_blocks).norm() / f.norm().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// `A KK^* <= U_sigma U_sigma^*` for every `sigma`.
pub fn check_characterization(w: &WeavingInstance, a_candidate: f64, tol: &Tolerances) -> Result<TheoremReport> {
    ensure_under_cap(w)?;
    let m = w.member_count();
    let target = w.k_op().kk_star().scaled(a_candidate);
    let mut max_adjoint = 0.0_f64;
    let mut first_failure: Option<Subset> = None;
    let mut upper_full = 0.0;
    let mut upper_empty = 0.0;

    for sigma in all_subsets(m)? {
        let inst = w.mixed_instance(&sigma, tol)?;
        let layout = GBasisLayout::for_family(inst.family());
        let u = synthesis_matrix(&inst, &layout)?;
        let (uu, _) = hermitize(&OperatorMatrix::wrap(u.matrix() * u.adjoint().matrix()))?;
        max_adjoint = max_adjoint.max(adjoint_residual(w, &sigma, 2, 0x5eed, tol)?);
        if first_failure.is_none() && !loewner_leq(&target, &uu, tol)? {
            first_failure = Some(sigma);
        }
        if sigma == Subset::full(m) || sigma == Subset::empty(m) {
            let top = eig_hermitian(&uu, tol)?.max();
            if sigma == Subset::full(m) {
                upper_full = top;
            }
            if sigma == Subset::empty(m) {
                upper_empty = top;
            }
        }
    }

    let hypotheses = vec![
        standing_commutation(w, tol)?,
        Hypothesis::new(
            "adjoint-formula",
            max_adjoint <= 1e-10,
            format!("max relative residual {max_adjoint:e}"),
        ),
        Hypothesis::new("positive-candidate", a_candidate > 0.0, format!("A = {a_candidate}")),
        Hypothesis::new(
            "loewner-condition",
            first_failure.is_none(),
            match first_failure {
                Some(s) => format!("A KK* <= U U* fails at sigma = {s}"),
                None => "holds for every subset".to_string(),
            },
        ),
    ];
    let mut report = TheoremReport::new(TheoremId::Characterization, hypotheses);
    report.claim(a_candidate, upper_full + upper_empty, true, tol);

    let mut notes = Vec::new();
    if let Some(cert) = oracle(w, tol, &mut notes)? {
        let summary = OracleSummary::from(&cert);
        report.judge(summary);
        // Equivalence: the Loewner condition holds iff the oracle's universal
        // lower bound reaches the candidate.
        let oracle_pass = cert.certificate.lower >= a_candidate - slack(a_candidate);
        let condition = first_failure.is_none();
        if oracle_pass != condition {
            report.oracle_agrees = Some(false);
            report
                .notes
                .push(format!("oracle lower {} vs candidate {a_candidate}", cert.certificate.lower));
        }
    }
    report.notes.extend(notes);
    Ok(report)
}

/// Basis `{e_k}` and real scalars `beta^k_{ij}` with the bound `M`.
#[derive(Clone, Debug)]
pub struct ScalarExpansion {
    basis: Vec<CVector>,
    /// `(i, j, k) -> beta^k_{ij}`, 0-based; absent entries are zero.
    coefficients: BTreeMap<(usize, usize, usize), f64>,
    m_bound: f64,
}

impl ScalarExpansion {
    pub fn new(basis: Vec<CVector>, coefficients: BTreeMap<(usize, usize, usize), f64>, m_bound: f64) -> Result<Self> {
        let n = basis.len();
        if n == 0 || basis.iter().any(|v| v.len() != n) {
            return Err(FrameError::InvalidParameter("basis must be n vectors of dimension n".into()));
        }
        let mut gram = DMatrix::<C64>::zeros(n, n);
        for (a, u) in basis.iter().enumerate() {
            for (b, v) in basis.iter().enumerate() {
                gram[(a, b)] = v.dotc(u);
            }
        }
        let deviation = (gram - DMatrix::identity(n, n)).norm();
        if deviation > 1e-9 {
            return Err(FrameError::NotOrthonormal { deviation });
        }
        if !(m_bound.is_finite() && m_bound > 0.0) {
            return Err(FrameError::InvalidParameter(format!("M must be positive, got {m_bound}")));
        }
        if coefficients.values().any(|b| !b.is_finite()) {
            return Err(FrameError::InvalidParameter("coefficients must be finite".into()));
        }
        Ok(Self {
            basis,
            coefficients,
            m_bound,
        })
    }

    pub fn standard_basis(n: usize) -> Vec<CVector> {
        (0..n)
            .map(|k| {
                let mut v = CVector::zeros(n);
                v[k] = C64::new(1.0, 0.0);
                v
            })
            .collect()
    }

    pub fn basis(&self) -> &[CVector] {
        &self.basis
    }

    pub fn coefficients(&self) -> &BTreeMap<(usize, usize, usize), f64> {
        &self.coefficients
    }

    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    /// `beta^k_{ij}`.
    pub fn beta(&self, i: usize, j: usize, k: usize) -> f64 {
        self.coefficients.get(&(i, j, k)).copied().unwrap_or(0.0)
    }
}

/// Bounds supplied by the caller instead of the computed optimal ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatedBounds {
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub omega_upper: f64,
}

fn pairwise_orthogonal(vectors: &[CVector], scale: f64) -> bool {
    let limit = IDENTITY_TOL * scale.max(f64::MIN_POSITIVE) + 1e-14;
    for a in 0..vectors.len() {
        for b in (a + 1)..vectors.len() {
            if vectors[b].dotc(&vectors[a]).norm() > limit {
                return false;
            }
        }
    }
    true
}

/// Scalar-perturbation criterion: orthogonal images, an expansion of `Omega`
/// through `Lambda`, and diagonal coefficients bounded below by `M`.
pub fn check_perturbation_scalars(
    w: &WeavingInstance,
    exp: &ScalarExpansion,
    stated: Option<StatedBounds>,
    tol: &Tolerances,
) -> Result<TheoremReport> {
    let n = w.ambient_dim();
    if exp.basis().len() != n {
        return Err(FrameError::DimensionMismatch {
            context: "expansion basis",
            expected: n,
            actual: exp.basis().len(),
        });
    }
    let r = w.controls().sqrt_product().matrix();
    let root_basis: Vec<CVector> = exp.basis().iter().map(|e| r * e).collect();
    let m = w.member_count();

    let mut orthogonal_failure = None;
    let mut expansion_residual = 0.0_f64;
    for j in 0..m {
        let lam = w.lambda().member(j).matrix();
        let om = w.omega().member(j).matrix();
        let lam_images: Vec<CVector> = root_basis.iter().map(|x| lam * x).collect();
        let om_images: Vec<CVector> = root_basis.iter().map(|x| om * x).collect();
        let lam_scale = (lam * r).norm_squared();
        let om_scale = (om * r).norm_squared();
        if orthogonal_failure.is_none() {
            if !pairwise_orthogonal(&lam_images, lam_scale) {
                orthogonal_failure = Some(format!("lambda member {}", j + 1));
            } else if !pairwise_orthogonal(&om_images, om_scale) {
                orthogonal_failure = Some(format!("omega member {}", j + 1));
            }
        }
        let scale = lam_scale.sqrt().max(om_scale.sqrt()).max(1.0);
        for (k, om_image) in om_images.iter().enumerate() {
            let mut rhs = CVector::zeros(om.nrows());
            for (i, image) in lam_images.iter().enumerate() {
                let beta = exp.beta(i, j, k);
                if beta != 0.0 {
                    rhs += image * C64::new(beta, 0.0);
                }
            }
            expansion_residual = expansion_residual.max((om_image - rhs).norm() / scale);
        }
    }

    let mut inf_diag = f64::INFINITY;
    for j in 0..m {
        for k in 0..n {
            inf_diag = inf_diag.min(exp.beta(k, j, k).powi(2));
        }
    }

    let lam_bounds = component_bounds(w.lambda(), w, tol)?;
    let om_bounds = component_bounds(w.omega(), w, tol)?;
    let mut hypotheses = vec![
        standing_commutation(w, tol)?,
        k_frame_hypothesis("lambda-k-frame", lam_bounds, tol),
        k_frame_hypothesis("omega-k-frame", om_bounds, tol),
        Hypothesis::new(
            "orthogonal-images",
            orthogonal_failure.is_none(),
            orthogonal_failure.map_or("every member maps the basis to an orthogonal set".to_string(), |s| {
                format!("images under {s} are not orthogonal")
            }),
        ),
        Hypothesis::new(
            "expansion-identity",
            expansion_residual <= IDENTITY_TOL,
            format!("max residual {expansion_residual:e}"),
        ),
        Hypothesis::new(
            "diagonal-lower-bound",
            inf_diag >= exp.m_bound(),
            format!("inf |beta^k_kj|^2 = {inf_diag}, M = {}", exp.m_bound()),
        ),
    ];

    let (mut a, mut b) = lam_bounds.unwrap_or((0.0, f64::INFINITY));
    let mut beta_omega = om_bounds.map_or(f64::INFINITY, |(_, u)| u);
    if let Some(s) = stated {
        let valid = match (lam_bounds, om_bounds) {
            (Some((la, lb)), Some((_, ob))) => {
                s.lambda_lower <= la + slack(la) && s.lambda_upper >= lb - slack(lb) && s.omega_upper >= ob - slack(ob)
            }
            _ => false,
        };
        hypotheses.push(Hypothesis::new(
            "stated-bounds-valid",
            valid,
            format!(
                "stated lambda ({}, {}), omega upper {}",
                s.lambda_lower, s.lambda_upper, s.omega_upper
            ),
        ));
        a = s.lambda_lower;
        b = s.lambda_upper;
        beta_omega = s.omega_upper;
    }

    let mut report = TheoremReport::new(TheoremId::Perturbation, hypotheses);
    let factor = exp.m_bound().min(1.0);
    report.claim(factor * a, b + beta_omega, true, tol);
    report
        .notes
        .push("claimed lower bound is min(1, M) times the lambda lower bound".into());

    let mut notes = Vec::new();
    if let Some(cert) = oracle(w, tol, &mut notes)? {
        report.judge(OracleSummary::from(&cert));
    }
    report.notes.extend(notes);
    Ok(report)
}

/// `K = sum C Lambda_i^* Omega_i C'` with symmetric cross terms.
pub fn check_cross_synthesis(w: &WeavingInstance, tol: &Tolerances) -> Result<TheoremReport> {
    let c = w.controls().c().matrix();
    let cp = w.controls().c_prime().matrix();
    let n = w.ambient_dim();
    let mut total = DMatrix::<C64>::zeros(n, n);
    let mut asymmetry = 0.0_f64;
    let mut cross_commute = true;
    for j in 0..w.member_count() {
        let lam = w.lambda().member(j);
        let om = w.omega().member(j);
        if lam.rows() != om.rows() {
            asymmetry = f64::INFINITY;
            continue;
        }
        let cross = lam.ad_mul(om.matrix());
        let forward = c * &cross * cp;
        let backward = c * om.ad_mul(lam.matrix()) * cp;
        asymmetry = asymmetry.max((&forward - backward).norm() / forward.norm().max(1.0));
        let cross_op = OperatorMatrix::wrap(cross);
        cross_commute &= w.controls().commutes_with(&cross_op, tol)?;
        total += forward;
    }
    let k = w.k_op().k().matrix();
    let k_norm = k.norm();
    let synthesis_gap = (k - &total).norm();

    let b1 = upper_bound(w.lambda(), w, tol)?;
    let b2 = upper_bound(w.omega(), w, tol)?;
    let hypotheses = vec![
        standing_commutation(w, tol)?,
        Hypothesis::new(
            "cross-terms-commute",
            cross_commute,
            "each Lambda_i^* Omega_i commutes with C and C'",
        ),
        Hypothesis::new("nonzero-k", !w.k_op().is_zero(tol), format!("||K||_F = {k_norm:e}")),
        Hypothesis::new(
            "k-synthesis",
            synthesis_gap <= IDENTITY_TOL * k_norm,
            format!("||K - sum C L* O C'||_F = {synthesis_gap:e}"),
        ),
        Hypothesis::new(
            "symmetric-cross-terms",
            asymmetry <= IDENTITY_TOL,
            format!("max relative asymmetry {asymmetry:e}"),
        ),
    ];
    let mut report = TheoremReport::new(TheoremId::CrossSynthesis, hypotheses);
    report.claim(1.0 / (2.0 * b1.max(b2)), b1 + b2, true, tol);

    let mut notes = Vec::new();
    if let Some(cert) = oracle(w, tol, &mut notes)? {
        report.judge(OracleSummary::from(&cert));
    }
    report.notes.extend(notes);
    Ok(report)
}

/// Local frames `{f_jk}` for each `H_j` and `{g_jk}` for each `W_j`.
#[derive(Clone, Debug)]
pub struct AtomicSystem {
    local_h: Vec<Vec<CVector>>,
    local_w: Vec<Vec<CVector>>,
    /// Common bounds `(alpha, beta)` of the `H` side.
    pub h_bounds: (f64, f64),
    /// Common bounds `(alpha', beta')` of the `W` side.
    pub w_bounds: (f64, f64),
}

fn common_bounds(side: &'static str, locals: &[Vec<CVector>], tol: &Tolerances) -> Result<(f64, f64)> {
    let mut lower = f64::INFINITY;
    let mut upper = 0.0_f64;
    for (index, family) in locals.iter().enumerate() {
        let (a, b) = crate::bounds::classical_frame_bounds(family)
            .map_err(|_| FrameError::LocalFrame { side, index: index + 1 })?;
        if a <= tol.psd_tol * b.max(1.0) {
            return Err(FrameError::LocalFrame { side, index: index + 1 });
        }
        lower = lower.min(a);
        upper = upper.max(b);
    }
    Ok((lower, upper))
}

impl AtomicSystem {
    pub fn new(local_h: Vec<Vec<CVector>>, local_w: Vec<Vec<CVector>>, tol: &Tolerances) -> Result<Self> {
        let h_bounds = common_bounds("H", &local_h, tol)?;
        let w_bounds = common_bounds("W", &local_w, tol)?;
        Ok(Self {
            local_h,
            local_w,
            h_bounds,
            w_bounds,
        })
    }

    /// Standard basis of every local space (`alpha = beta = 1`).
    pub fn orthonormal(w: &WeavingInstance, tol: &Tolerances) -> Result<Self> {
        let basis = |d: usize| ScalarExpansion::standard_basis(d);
        Self::new(
            w.lambda().codomain_dims().into_iter().map(basis).collect(),
            w.omega().codomain_dims().into_iter().map(basis).collect(),
            tol,
        )
    }

    pub fn local_h(&self) -> &[Vec<CVector>] {
        &self.local_h
    }

    pub fn local_w(&self) -> &[Vec<CVector>] {
        &self.local_w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomicDirection {
    /// Controlled weaving implies weaving of the induced vector families.
    Forward,
    /// Weaving of the induced vector families implies controlled weaving.
    Backward,
}

fn induced_family(family: &GFrameFamily, locals: &[Vec<CVector>], root: &DMatrix<C64>) -> Result<GFrameFamily> {
    let members = family
        .members()
        .iter()
        .zip(locals)
        .map(|(member, local)| {
            // Row k is (root Lambda_j^* f_jk)^* = f_jk^* Lambda_j root.
            let rows = DMatrix::from_fn(local.len(), member.rows(), |k, i| local[k][i].conj());
            OperatorMatrix::from_matrix(rows * member.matrix() * root)
        })
        .collect::<Result<Vec<_>>>()?;
    GFrameFamily::new(family.ambient_dim(), members)
}

/// Weaving instance of the vector families `{(CC')^{1/2} Lambda_j^* f_jk}`,
/// `{(CC')^{1/2} Omega_j^* g_jk}`, grouped by node `j`, with identity controls.
pub fn induced_weaving(w: &WeavingInstance, atoms: &AtomicSystem) -> Result<WeavingInstance> {
    let m = w.member_count();
    for (side, locals, dims) in [
        ("H", atoms.local_h(), w.lambda().codomain_dims()),
        ("W", atoms.local_w(), w.omega().codomain_dims()),
    ] {
        if locals.len() != m {
            return Err(FrameError::DimensionMismatch {
                context: if side == "H" { "local H frames" } else { "local W frames" },
                expected: m,
                actual: locals.len(),
            });
        }
        for (index, (local, &d)) in locals.iter().zip(&dims).enumerate() {
            if local.iter().any(|v| v.len() != d) {
                return Err(FrameError::LocalFrame { side, index: index + 1 });
            }
        }
    }
    let root = w.controls().sqrt_product().matrix();
    WeavingInstance::new(
        induced_family(w.lambda(), atoms.local_h(), root)?,
        induced_family(w.omega(), atoms.local_w(), root)?,
        ControlPair::identity(w.ambient_dim()),
        KOperator::new(w.k_op().k().clone())?,
    )
}

/// Transfer of weaving between controlled g-families and their induced vector families.
pub fn check_atomic_equivalence(
    w: &WeavingInstance,
    atoms: &AtomicSystem,
    direction: AtomicDirection,
    tol: &Tolerances,
) -> Result<TheoremReport> {
    ensure_under_cap(w)?;
    let induced = induced_weaving(w, atoms)?;
    let (alpha, beta) = atoms.h_bounds;
    let (alpha_p, beta_p) = atoms.w_bounds;
    let commutation = standing_commutation(w, tol)?;
    let mut notes = Vec::new();
    let controlled = if commutation.holds {
        oracle(w, tol, &mut notes)?
    } else {
        None
    };
    let vector_level = universal_bounds_exhaustive(&induced, tol)?;

    let atoms_hypothesis = Hypothesis::new(
        "local-frames",
        true,
        format!("alpha = {alpha}, beta = {beta}, alpha' = {alpha_p}, beta' = {beta_p}"),
    );
    let mut report = match direction {
        AtomicDirection::Forward => {
            let (holds, detail, a, b) = match &controlled {
                Some(cert) => (
                    cert.woven,
                    format!("universal bounds ({}, {})", cert.certificate.lower, cert.certificate.upper),
                    cert.certificate.lower,
                    cert.certificate.upper,
                ),
                None => (false, "controlled oracle unavailable".to_string(), 0.0, f64::INFINITY),
            };
            let mut report = TheoremReport::new(
                TheoremId::Atomic,
                vec![commutation, atoms_hypothesis, Hypothesis::new("controlled-woven", holds, detail)],
            );
            report.claim(alpha.min(alpha_p) * a, beta.max(beta_p) * b, true, tol);
            report.judge(OracleSummary::from(&vector_level));
            report
        }
        AtomicDirection::Backward => {
            let c_star = vector_level.certificate.lower;
            let d_star = vector_level.certificate.upper;
            let mut report = TheoremReport::new(
                TheoremId::Atomic,
                vec![
                    commutation,
                    atoms_hypothesis,
                    Hypothesis::new(
                        "induced-woven",
                        vector_level.woven,
                        format!("induced universal bounds ({c_star}, {d_star})"),
                    ),
                ],
            );
            report.claim(c_star / beta.max(beta_p), d_star / alpha.min(alpha_p), true, tol);
            if let Some(cert) = &controlled {
                report.judge(OracleSummary::from(cert));
            }
            report
        }
    };
    report
        .notes
        .push("lower transfer constant uses the lower local bounds min(alpha, alpha')".into());
    if let Some(cert) = &controlled {
        report.notes.push(format!(
            "controlled woven = {}, induced woven = {}",
            cert.woven, vector_level.woven
        ));
        // Both universal bounds must transfer with the local frame constants;
        // verdicts may differ only when a lower bound sits at the PSD threshold.
        let lo = alpha.min(alpha_p);
        let hi = beta.max(beta_p);
        let within = |induced: f64, controlled: f64| {
            !induced.is_finite()
                || !controlled.is_finite()
                || (induced >= lo * controlled - slack(lo * controlled) && induced <= hi * controlled + slack(hi * controlled))
        };
        let transfers = within(vector_level.certificate.lower, cert.certificate.lower)
            && within(vector_level.certificate.upper, cert.certificate.upper);
        if !transfers {
            report.oracle_agrees = Some(false);
            report.notes.push("universal bounds do not transfer with the local frame constants".into());
        }
    }
    report.notes.extend(notes);
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMode {
    /// `Omega_i^* Omega_i - Lambda_i^* Lambda_i >= 0` for each `i`; implies every `J`.
    #[default]
    PerIndex,
    /// Every `J` checked directly.
    AllSubsets,
}

/// `U_J = sum_{i in J} (Omega_i^* Omega_i - Lambda_i^* Lambda_i)` is positive for every `J`.
pub fn check_positive_gap(w: &WeavingInstance, mode: GapMode, tol: &Tolerances) -> Result<TheoremReport> {
    let m = w.member_count();
    let gaps: Vec<DMatrix<C64>> = (0..m)
        .map(|i| {
            let om = w.omega().member(i);
            let lam = w.lambda().member(i);
            om.ad_mul(om.matrix()) - lam.ad_mul(lam.matrix())
        })
        .collect();
    let zero = OperatorMatrix::zeros(w.ambient_dim(), w.ambient_dim());
    let gap_hypothesis = match mode {
        GapMode::PerIndex => {
            let mut failure = None;
            for (i, gap) in gaps.iter().enumerate() {
                if !loewner_leq(&zero, &OperatorMatrix::wrap(gap.clone()), tol)? {
                    failure = Some(i + 1);
                    break;
                }
            }
            Hypothesis::new(
                "positive-gap",
                failure.is_none(),
                failure.map_or("every index has a PSD gap".to_string(), |i| {
                    format!("gap at index {i} has a negative eigenvalue")
                }),
            )
        }
        GapMode::AllSubsets => {
            ensure_under_cap(w)?;
            let mut failure = None;
            for subset in all_subsets(m)? {
                let mut sum = DMatrix::<C64>::zeros(w.ambient_dim(), w.ambient_dim());
                for (i, gap) in gaps.iter().enumerate() {
                    if subset.contains(i) {
                        sum += gap;
                    }
                }
                if !loewner_leq(&zero, &OperatorMatrix::wrap(sum), tol)? {
                    failure = Some(subset);
                    break;
                }
            }
            Hypothesis::new(
                "positive-gap",
                failure.is_none(),
                failure.map_or("every subset has a PSD gap".to_string(), |s| format!("U_J fails at J = {s}")),
            )
        }
    };

    let lam_bounds = component_bounds(w.lambda(), w, tol)?;
    let om_bounds = component_bounds(w.omega(), w, tol)?;
    let hypotheses = vec![
        standing_commutation(w, tol)?,
        k_frame_hypothesis("lambda-k-frame", lam_bounds, tol),
        k_frame_hypothesis("omega-k-frame", om_bounds, tol),
        gap_hypothesis,
    ];
    let mut report = TheoremReport::new(TheoremId::PositiveGap, hypotheses);
    if let (Some((a, b)), Some((_, beta))) = (lam_bounds, om_bounds) {
        report.claim(a, b + beta, true, tol);
    }

    let mut notes = Vec::new();
    if let Some(cert) = oracle(w, tol, &mut notes)? {
        report.judge(OracleSummary::from(&cert));
    }
    report.notes.extend(notes);
    Ok(report)
}
