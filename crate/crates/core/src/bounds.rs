//! Optimal frame bounds and frame/Bessel verdicts for a single instance.
//!
//! The optimal upper bound is `lambda_max(S)`. The optimal lower bound is the
//! Loewner supremum `sup { A : S - A KK^* >= 0 }`, which is what the frame
//! inequality means when quantified over every `f`.

use crate::error::{FrameError, Result};
use crate::frame_ops::{frame_operator, vector_frame_operator};
use crate::model::{Advisory, BoundCertificate, ControlPair, ControlledInstance, GFrameFamily, KOperator};
use crate::numerics::{eig_hermitian, loewner_leq, max_scale_psd, CVector, OperatorMatrix, Tolerances};

pub fn optimal_bounds(inst: &ControlledInstance, tol: &Tolerances) -> Result<BoundCertificate> {
    if !inst.commutation_ok() {
        return Err(FrameError::CommutationAssumption);
    }
    let fo = frame_operator(inst);
    let spectrum = eig_hermitian(&fo.matrix, tol)?;
    let limit = tol.psd_tol * spectrum.spectral_norm().max(1.0);
    if spectrum.min() < -limit {
        return Err(FrameError::NegativeEigenvalue {
            lambda_min: spectrum.min(),
            limit,
        });
    }

    let mut advisories = Vec::new();
    if fo.hermitian_residual > tol.commute_tol * fo.matrix.frobenius_norm().max(1.0) {
        advisories.push(Advisory::SkewFrameOperator {
            residual: fo.hermitian_residual,
        });
    }

    let upper = spectrum.max();
    let upper_witness = spectrum.vector(spectrum.dim() - 1);

    if inst.k_op().is_zero(tol) {
        advisories.push(Advisory::VacuousLowerBound);
        return Ok(BoundCertificate {
            lower: f64::INFINITY,
            upper,
            lower_witness: None,
            upper_witness,
            worst_subset: None,
            is_frame: true,
            advisories,
        });
    }

    let scale = max_scale_psd(&fo.matrix, inst.k_op().kk_star(), tol)?;
    Ok(BoundCertificate {
        lower: scale.value,
        upper,
        lower_witness: Some(scale.witness),
        upper_witness,
        worst_subset: None,
        is_frame: scale.value > tol.psd_tol,
        advisories,
    })
}

/// Whether `B` is an upper (Bessel) bound: `S <= B I`.
pub fn is_bessel(inst: &ControlledInstance, bound: f64, tol: &Tolerances) -> Result<bool> {
    let fo = frame_operator(inst);
    loewner_leq(&fo.matrix, &OperatorMatrix::identity(inst.dim()).scaled(bound), tol)
}

/// Extreme eigenvalues of `sum_j f_j f_j^*`.
pub fn classical_frame_bounds(vectors: &[CVector]) -> Result<(f64, f64)> {
    let s = vector_frame_operator(vectors)?;
    let spectrum = eig_hermitian(&s, &Tolerances::default())?;
    Ok((spectrum.min().max(0.0), spectrum.max()))
}

/// The instance with `d_j = 1`, `C = C' = K = I` induced by a vector family.
pub fn lift_vectors(vectors: &[CVector], tol: &Tolerances) -> Result<ControlledInstance> {
    let family = GFrameFamily::from_vectors(vectors)?;
    let n = family.ambient_dim();
    ControlledInstance::from_parts(family, ControlPair::identity(n), KOperator::identity(n), tol)
}
