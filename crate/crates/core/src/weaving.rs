//! Wovenness decisions by enumeration of `sigma`.
//!
//! Every evaluated subset yields the optimal bounds of its mixed family; the
//! universal bounds are the min of the lower and the max of the upper bounds.
//! Subsets are visited in ascending mask order, so ties for the worst subset
//! resolve to the smallest mask.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::optimal_bounds;
use crate::error::{FrameError, Result};
use crate::model::{
    Advisory, BoundCertificate, ControlledInstance, Subset, WeavingInstance, EXHAUSTIVE_CAP,
};
use crate::numerics::{OperatorMatrix, Tolerances, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EnumerationMode {
    Exhaustive,
    Sampled { trials: usize, seed: u64 },
}

/// Universal bounds over the evaluated subsets.
#[derive(Clone, Debug)]
pub struct WeavingCertificate {
    /// `lower`/`upper` are the universal bounds; `worst_subset` attains `lower`
    /// up to the bisection resolution, preferring the smallest mask.
    pub certificate: BoundCertificate,
    pub woven: bool,
    pub mode: EnumerationMode,
    pub subsets_evaluated: usize,
    /// Smallest subset attaining the universal upper bound.
    pub upper_subset: Subset,
    /// Smallest evaluated subset whose mixed family is not a frame.
    pub first_non_frame: Option<Subset>,
}

/// Mixed-family builder that reuses the per-member Gram operators.
pub(crate) struct SubsetEvaluator<'a> {
    weave: &'a WeavingInstance,
    lambda_grams: Vec<DMatrix<C64>>,
    omega_grams: Vec<DMatrix<C64>>,
}

impl<'a> SubsetEvaluator<'a> {
    pub(crate) fn new(weave: &'a WeavingInstance) -> Self {
        let grams = |family: &crate::model::GFrameFamily| {
            family
                .members()
                .iter()
                .map(|m| m.ad_mul(m.matrix()))
                .collect::<Vec<_>>()
        };
        Self {
            lambda_grams: grams(weave.lambda()),
            omega_grams: grams(weave.omega()),
            weave,
        }
    }

    pub(crate) fn instance(&self, sigma: &Subset, tol: &Tolerances) -> Result<ControlledInstance> {
        let family = self.weave.subfamily(sigma)?;
        let n = self.weave.ambient_dim();
        let mut gram = DMatrix::zeros(n, n);
        for j in 0..self.weave.member_count() {
            gram += if sigma.contains(j) {
                &self.lambda_grams[j]
            } else {
                &self.omega_grams[j]
            };
        }
        ControlledInstance::with_gram(
            family,
            self.weave.controls().clone(),
            self.weave.k_op().clone(),
            OperatorMatrix::wrap(gram),
            tol,
        )
    }

    pub(crate) fn bounds(&self, sigma: &Subset, tol: &Tolerances) -> Result<BoundCertificate> {
        optimal_bounds(&self.instance(sigma, tol)?, tol)
    }
}

/// Optimal bounds of `{Lambda_j}_{j in sigma} U {Omega_j}_{j not in sigma}`.
pub fn per_subset_bounds(w: &WeavingInstance, sigma: &Subset, tol: &Tolerances) -> Result<BoundCertificate> {
    SubsetEvaluator::new(w).bounds(sigma, tol)
}

/// Differences below the bisection resolution do not displace an earlier
/// subset as the reported one; the bounds themselves are exact extremes.
fn tie_width(value: f64, tol: &Tolerances) -> f64 {
    if value.is_finite() {
        tol.bisect_tol * (1.0 + value.abs())
    } else {
        0.0
    }
}

fn reduce(
    w: &WeavingInstance,
    subsets: impl Iterator<Item = Subset>,
    mode: EnumerationMode,
    tol: &Tolerances,
) -> Result<WeavingCertificate> {
    let evaluator = SubsetEvaluator::new(w);
    let mut worst: Option<(Subset, BoundCertificate)> = None;
    let mut top: Option<(Subset, BoundCertificate)> = None;
    let mut first_non_frame = None;
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    let mut evaluated = 0;
    let mut vacuous = false;

    for sigma in subsets {
        let cert = evaluator.bounds(&sigma, tol)?;
        evaluated += 1;
        vacuous |= cert.advisories.contains(&Advisory::VacuousLowerBound);
        if !cert.is_frame && first_non_frame.is_none() {
            first_non_frame = Some(sigma);
        }
        lower = lower.min(cert.lower);
        upper = upper.max(cert.upper);
        if worst.as_ref().map_or(true, |(_, c)| cert.lower < c.lower - tie_width(c.lower, tol)) {
            worst = Some((sigma, cert.clone()));
        }
        if top.as_ref().map_or(true, |(_, c)| cert.upper > c.upper + tie_width(c.upper, tol)) {
            top = Some((sigma, cert));
        }
    }

    let (worst_sigma, worst_cert) = worst.ok_or_else(|| FrameError::InvalidParameter("no subsets evaluated".into()))?;
    let (top_sigma, top_cert) = top.expect("set alongside worst");

    let mut advisories = Vec::new();
    if vacuous {
        advisories.push(Advisory::VacuousLowerBound);
    }
    if let EnumerationMode::Sampled { .. } = mode {
        advisories.push(Advisory::SampledNotExhaustive { evaluated });
    }
    let woven = first_non_frame.is_none() && lower > tol.psd_tol;
    Ok(WeavingCertificate {
        certificate: BoundCertificate {
            lower,
            upper,
            lower_witness: worst_cert.lower_witness,
            upper_witness: top_cert.upper_witness,
            worst_subset: Some(worst_sigma),
            is_frame: woven,
            advisories,
        },
        woven,
        mode,
        subsets_evaluated: evaluated,
        upper_subset: top_sigma,
        first_non_frame,
    })
}

/// Iterates every subset of `{1..m}` in ascending mask order.
pub fn all_subsets(m: usize) -> Result<impl Iterator<Item = Subset>> {
    if m > EXHAUSTIVE_CAP {
        return Err(FrameError::CapExceeded {
            members: m,
            cap: EXHAUSTIVE_CAP,
        });
    }
    Ok((0..(1u64 << m)).map(move |bits| Subset::new(bits, m).expect("mask within width")))
}

pub fn universal_bounds_exhaustive(w: &WeavingInstance, tol: &Tolerances) -> Result<WeavingCertificate> {
    let subsets = all_subsets(w.member_count())?;
    reduce(w, subsets, EnumerationMode::Exhaustive, tol)
}

/// The subsets visited by [`universal_bounds_sampled`], in evaluation order.
pub fn sampled_subsets(m: usize, trials: usize, seed: u64) -> BTreeSet<Subset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = BTreeSet::new();
    set.insert(Subset::empty(m));
    set.insert(Subset::full(m));
    let mask = Subset::full(m).bits();
    for _ in 0..trials {
        let bits = rng.random::<u64>() & mask;
        set.insert(Subset::new(bits, m).expect("masked"));
    }
    set
}

/// Universal bounds over `trials` seeded random subsets plus the two trivial ones.
///
/// The lower bound is an over-estimate and the upper bound an under-estimate
/// of the exhaustive values.
pub fn universal_bounds_sampled(
    w: &WeavingInstance,
    trials: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<WeavingCertificate> {
    if trials == 0 {
        return Err(FrameError::InvalidParameter("trials must be at least 1".into()));
    }
    let subsets = sampled_subsets(w.member_count(), trials, seed);
    reduce(w, subsets.into_iter(), EnumerationMode::Sampled { trials, seed }, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControlPair, GFrameFamily, KOperator};

    fn swap_pair() -> WeavingInstance {
        let e1 = OperatorMatrix::from_real_rows(&[&[1.0, 0.0]]);
        let e2 = OperatorMatrix::from_real_rows(&[&[0.0, 1.0]]);
        WeavingInstance::new(
            GFrameFamily::new(2, vec![e1.clone(), e2.clone()]).unwrap(),
            GFrameFamily::new(2, vec![e2, e1]).unwrap(),
            ControlPair::identity(2),
            KOperator::identity(2),
        )
        .unwrap()
    }

    #[test]
    fn swap_pair_is_not_woven() {
        let tol = Tolerances::default();
        let cert = universal_bounds_exhaustive(&swap_pair(), &tol).unwrap();
        assert!(!cert.woven);
        assert_eq!(cert.subsets_evaluated, 4);
        let worst = cert.certificate.worst_subset.unwrap();
        // sigma = {1} keeps Lambda_1 = <., e1> and Omega_2 = <., e1>.
        assert_eq!(worst.indices(), vec![1]);
        assert!(cert.certificate.lower < 1e-9);
        assert_eq!(cert.first_non_frame.unwrap().indices(), vec![1]);
    }

    #[test]
    fn identical_families_reduce_to_single_instance() {
        let tol = Tolerances::default();
        let fam = GFrameFamily::new(
            2,
            vec![
                OperatorMatrix::from_real_rows(&[&[1.0, 0.5]]),
                OperatorMatrix::from_real_rows(&[&[0.0, 2.0], &[1.0, 1.0]]),
                OperatorMatrix::from_real_rows(&[&[-1.0, 0.3]]),
            ],
        )
        .unwrap();
        let w = WeavingInstance::new(fam.clone(), fam, ControlPair::identity(2), KOperator::identity(2)).unwrap();
        let single = optimal_bounds(&w.lambda_instance(&tol).unwrap(), &tol).unwrap();
        let ex = universal_bounds_exhaustive(&w, &tol).unwrap();
        assert!(ex.woven);
        assert!((ex.certificate.lower - single.lower).abs() < 1e-12);
        assert!((ex.certificate.upper - single.upper).abs() < 1e-12);
        let sm = universal_bounds_sampled(&w, 3, 11, &tol).unwrap();
        assert!((sm.certificate.lower - single.lower).abs() < 1e-12);
        assert!((sm.certificate.upper - single.upper).abs() < 1e-12);
    }

    #[test]
    fn trivial_subsets_recover_components() {
        let tol = Tolerances::default();
        let w = swap_pair();
        let full = per_subset_bounds(&w, &Subset::full(2), &tol).unwrap();
        let lam = optimal_bounds(&w.lambda_instance(&tol).unwrap(), &tol).unwrap();
        assert_eq!(full.lower, lam.lower);
        let empty = per_subset_bounds(&w, &Subset::empty(2), &tol).unwrap();
        let om = optimal_bounds(&w.omega_instance(&tol).unwrap(), &tol).unwrap();
        assert_eq!(empty.upper, om.upper);
    }

    #[test]
    fn sampling_is_deterministic_and_covers_small_sets() {
        let tol = Tolerances::default();
        let w = swap_pair();
        let a = universal_bounds_sampled(&w, 5, 42, &tol).unwrap();
        let b = universal_bounds_sampled(&w, 5, 42, &tol).unwrap();
        assert_eq!(a.certificate.lower, b.certificate.lower);
        assert_eq!(a.certificate.worst_subset, b.certificate.worst_subset);
        assert_eq!(sampled_subsets(2, 5, 42), sampled_subsets(2, 5, 42));

        let covered = sampled_subsets(3, 200, 1);
        let all: BTreeSet<Subset> = all_subsets(3).unwrap().collect();
        assert_eq!(covered, all);
        assert!(universal_bounds_sampled(&w, 0, 1, &tol).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(all_subsets(21), Err(FrameError::CapExceeded { members: 21, cap: 20 })));
    }
}
