//! Instance generators: the truncated worked example and seeded random instances.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FrameError, Result};
use crate::model::{ControlPair, GFrameFamily, KOperator, WeavingInstance, EXHAUSTIVE_CAP};
use crate::numerics::{CVector, OperatorMatrix, Tolerances, C64};
use crate::theorems::{AtomicSystem, ScalarExpansion};

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// The control of the worked example: identity plus the symmetric coupling of `e1` and `e2`.
pub fn example_control(n: usize) -> OperatorMatrix {
    let mut c = DMatrix::<C64>::identity(n, n);
    c[(0, 1)] = real(0.5);
    c[(1, 0)] = real(0.5);
    OperatorMatrix::from_matrix(c).expect("finite")
}

/// Orthogonal projection onto `span{e3, ..., eN}`.
pub fn example_k(n: usize) -> OperatorMatrix {
    let diagonal: Vec<f64> = (0..n).map(|i| if i >= 2 { 1.0 } else { 0.0 }).collect();
    OperatorMatrix::from_real_diagonal(&diagonal)
}

fn coordinate_pair(n: usize, first: usize, first_weight: f64) -> OperatorMatrix {
    let mut m = DMatrix::<C64>::zeros(2, n);
    m[(0, first)] = real(first_weight);
    m[(1, first + 1)] = real(1.0);
    OperatorMatrix::from_matrix(m).expect("finite")
}

/// The worked example truncated to dimension `n`.
///
/// Member `j` (1-based, `j <= n - 3`) of `Lambda` reads the coordinates of
/// `e_{j+2}` and `e_{j+3}`; `Omega_j` additionally scales the first by
/// `1 + 2^-j`. The expansion carries `beta^k_kj = 1 + 2^-j` when `k = j + 2`,
/// `1` on the rest of the diagonal, and `M = 1`.
pub fn worked_example(n: usize) -> Result<(WeavingInstance, ScalarExpansion)> {
    if n < 6 {
        return Err(FrameError::InvalidParameter(format!(
            "the worked example needs dimension at least 6, got {n}"
        )));
    }
    let tol = Tolerances::default();
    let m = n - 3;
    let lambda = (0..m).map(|j| coordinate_pair(n, j + 2, 1.0)).collect();
    let omega = (0..m)
        .map(|j| coordinate_pair(n, j + 2, 1.0 + 0.5_f64.powi(j as i32 + 1)))
        .collect();
    let c = example_control(n);
    let weave = WeavingInstance::new(
        GFrameFamily::new(n, lambda)?,
        GFrameFamily::new(n, omega)?,
        ControlPair::new(c.clone(), c, &tol)?,
        KOperator::new(example_k(n))?,
    )?;

    let mut coefficients = BTreeMap::new();
    for j in 0..m {
        for k in 0..n {
            let beta = if k == j + 2 { 1.0 + 0.5_f64.powi(j as i32 + 1) } else { 1.0 };
            coefficients.insert((k, j, k), beta);
        }
    }
    let expansion = ScalarExpansion::new(ScalarExpansion::standard_basis(n), coefficients, 1.0)?;
    Ok((weave, expansion))
}

/// The two-dimensional pair `Lambda = {<., e1>, <., e2>}` with `Omega` reversed.
pub fn swap_pair() -> WeavingInstance {
    let e1 = OperatorMatrix::from_real_rows(&[&[1.0, 0.0]]);
    let e2 = OperatorMatrix::from_real_rows(&[&[0.0, 1.0]]);
    WeavingInstance::new(
        GFrameFamily::new(2, vec![e1.clone(), e2.clone()]).expect("valid family"),
        GFrameFamily::new(2, vec![e2, e1]).expect("valid family"),
        ControlPair::identity(2),
        KOperator::identity(2),
    )
    .expect("valid weave")
}

/// Parameters of [`random_instance`].
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSpec {
    pub n: usize,
    /// Codomain dimension of each member; its length is the member count.
    pub dims: Vec<usize>,
    /// Control eigenvalues are drawn from `[1/spread, spread]`.
    pub spread: f64,
    /// Build members whose Gram operators are diagonal in the control eigenbasis.
    pub commuting: bool,
}

impl RandomSpec {
    pub fn new(n: usize, dims: Vec<usize>, spread: f64, commuting: bool) -> Self {
        Self {
            n,
            dims,
            spread,
            commuting,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(FrameError::InvalidParameter("n must be at least 1".into()));
        }
        if self.dims.is_empty() || self.dims.len() > EXHAUSTIVE_CAP {
            return Err(FrameError::InvalidParameter(format!(
                "member count must be in 1..={EXHAUSTIVE_CAP}, got {}",
                self.dims.len()
            )));
        }
        if self.dims.contains(&0) {
            return Err(FrameError::InvalidParameter("codomain dimensions must be positive".into()));
        }
        if !(self.spread.is_finite() && self.spread >= 1.0) {
            return Err(FrameError::InvalidParameter(format!(
                "spread must be finite and at least 1, got {}",
                self.spread
            )));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// A `rows x cols` isometry (`rows >= cols`) from the QR factor of a Gaussian matrix.
fn random_isometry(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    gaussian_matrix(rows, cols, rng).qr().q()
}

fn log_uniform(spread: f64, rng: &mut ChaCha8Rng) -> f64 {
    if spread == 1.0 {
        return 1.0;
    }
    let t: f64 = rng.random_range(-1.0..=1.0);
    spread.powf(t)
}

fn diagonal_in(basis: &DMatrix<C64>, values: &[f64]) -> DMatrix<C64> {
    let mut scaled = basis.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v);
    }
    &scaled * basis.adjoint()
}

struct Draw {
    rng: ChaCha8Rng,
    basis: DMatrix<C64>,
    coordinates: Vec<Vec<usize>>,
}

impl Draw {
    fn new(seed: u64, spec: &RandomSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = random_isometry(spec.n, spec.n, &mut rng);
        Self {
            rng,
            basis,
            coordinates: Vec::new(),
        }
    }

    fn controls(&mut self, spec: &RandomSpec, tol: &Tolerances) -> Result<ControlPair> {
        if spec.spread == 1.0 {
            return Ok(ControlPair::identity(spec.n));
        }
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..spec.n).map(|_| log_uniform(spec.spread, rng)).collect() };
        let c = draw(&mut self.rng);
        let cp = draw(&mut self.rng);
        ControlPair::new(
            OperatorMatrix::from_matrix(diagonal_in(&self.basis, &c))?,
            OperatorMatrix::from_matrix(diagonal_in(&self.basis, &cp))?,
            tol,
        )
    }

    fn k_operator(&mut self, n: usize) -> Result<KOperator> {
        let rank = self.rng.random_range(1..=n);
        let q = random_isometry(n, rank, &mut self.rng);
        let projection = &q * q.adjoint();
        let w = random_isometry(n, n, &mut self.rng);
        let weights: Vec<f64> = (0..n).map(|_| self.rng.random_range(0.5..=2.0)).collect();
        KOperator::new(OperatorMatrix::from_matrix(projection * diagonal_in(&w, &weights))?)
    }

    /// Active control-eigenbasis coordinates of every member; every coordinate
    /// is assigned to some member whenever capacity allows.
    fn assign_coordinates(&mut self, n: usize, dims: &[usize]) {
        let mut sets: Vec<Vec<usize>> = dims
            .iter()
            .map(|&d| {
                let r = self.rng.random_range(1..=d.min(n));
                rand::seq::index::sample(&mut self.rng, n, r).into_vec()
            })
            .collect();
        for k in 0..n {
            if sets.iter().any(|s| s.contains(&k)) {
                continue;
            }
            if let Some((j, _)) = sets.iter().enumerate().find(|(j, s)| s.len() < dims[*j].min(n)) {
                sets[j].push(k);
            }
        }
        self.coordinates = sets;
    }

    /// `U_j diag(weights) E_j V^*`, with rows of `E_j` the active coordinates.
    fn diagonal_member(&mut self, j: usize, d: usize, weights: &[f64]) -> Result<OperatorMatrix> {
        let coords = &self.coordinates[j];
        let n = self.basis.nrows();
        let u = random_isometry(d, coords.len(), &mut self.rng);
        let mut e = DMatrix::<C64>::zeros(coords.len(), n);
        for (row, (&k, &w)) in coords.iter().zip(weights).enumerate() {
            e[(row, k)] = real(w);
        }
        OperatorMatrix::from_matrix(u * e * self.basis.adjoint())
    }

    fn weights(&mut self, count: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..count).map(|_| self.rng.random_range(lo..=hi)).collect()
    }

    fn dense_member(&mut self, d: usize, n: usize) -> Result<OperatorMatrix> {
        let scale = 1.0 / (n as f64).sqrt();
        OperatorMatrix::from_matrix(gaussian_matrix(d, n, &mut self.rng) * real(scale))
    }
}

/// Seeded random weaving instance; identical seeds give bitwise-identical instances.
pub fn random_instance(seed: u64, spec: &RandomSpec) -> Result<WeavingInstance> {
    spec.validate()?;
    let tol = Tolerances::default();
    let mut draw = Draw::new(seed, spec);
    let controls = draw.controls(spec, &tol)?;
    let k_op = draw.k_operator(spec.n)?;
    let family = |draw: &mut Draw| -> Result<GFrameFamily> {
        let mut members = Vec::with_capacity(spec.dims.len());
        if spec.commuting {
            draw.assign_coordinates(spec.n, &spec.dims);
        }
        for (j, &d) in spec.dims.iter().enumerate() {
            members.push(if spec.commuting {
                let count = draw.coordinates[j].len();
                let w = draw.weights(count, 0.2, 1.5);
                draw.diagonal_member(j, d, &w)?
            } else {
                draw.dense_member(d, spec.n)?
            });
        }
        GFrameFamily::new(spec.n, members)
    };
    let lambda = family(&mut draw)?;
    let omega = family(&mut draw)?;
    WeavingInstance::new(lambda, omega, controls, k_op)
}

/// A commuting pair with `Omega_j = U_j diag(w b) E_j V^*` sharing the active
/// coordinates of `Lambda_j = U_j diag(w) E_j V^*`, with scalars `b` drawn from
/// `scale_range`, and the matching expansion in the control eigenbasis.
pub fn scaled_pair(seed: u64, spec: &RandomSpec, scale_range: (f64, f64)) -> Result<(WeavingInstance, ScalarExpansion)> {
    spec.validate()?;
    let (lo, hi) = scale_range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
        return Err(FrameError::InvalidParameter(format!("invalid scale range ({lo}, {hi})")));
    }
    let tol = Tolerances::default();
    let mut draw = Draw::new(seed, spec);
    let controls = draw.controls(spec, &tol)?;
    let k_op = draw.k_operator(spec.n)?;
    draw.assign_coordinates(spec.n, &spec.dims);

    let mut lambda = Vec::new();
    let mut omega = Vec::new();
    let mut coefficients = BTreeMap::new();
    let mut m_bound = f64::INFINITY;
    for (j, &d) in spec.dims.iter().enumerate() {
        let coords = draw.coordinates[j].clone();
        let w = draw.weights(coords.len(), 0.2, 1.5);
        let b = draw.weights(coords.len(), lo, hi);
        let u = random_isometry(d, coords.len(), &mut draw.rng);
        let mut e_lam = DMatrix::<C64>::zeros(coords.len(), spec.n);
        let mut e_om = DMatrix::<C64>::zeros(coords.len(), spec.n);
        for (row, &k) in coords.iter().enumerate() {
            e_lam[(row, k)] = real(w[row]);
            e_om[(row, k)] = real(w[row] * b[row]);
        }
        lambda.push(OperatorMatrix::from_matrix(&u * e_lam * draw.basis.adjoint())?);
        omega.push(OperatorMatrix::from_matrix(&u * e_om * draw.basis.adjoint())?);
        for k in 0..spec.n {
            let beta = coords.iter().position(|&c| c == k).map_or(1.0, |row| b[row]);
            coefficients.insert((k, j, k), beta);
            m_bound = m_bound.min(beta * beta);
        }
    }
    let weave = WeavingInstance::new(
        GFrameFamily::new(spec.n, lambda)?,
        GFrameFamily::new(spec.n, omega)?,
        controls,
        k_op,
    )?;
    let basis = (0..spec.n).map(|k| draw.basis.column(k).into_owned()).collect();
    Ok((weave, ScalarExpansion::new(basis, coefficients, m_bound)?))
}

/// The same weave with `K = sum_j C Lambda_j^* Omega_j C'`.
pub fn with_cross_synthesis_k(w: &WeavingInstance) -> Result<WeavingInstance> {
    let n = w.ambient_dim();
    let c = w.controls().c().matrix();
    let cp = w.controls().c_prime().matrix();
    let mut k = DMatrix::<C64>::zeros(n, n);
    for (lam, om) in w.lambda().members().iter().zip(w.omega().members()) {
        k += c * lam.ad_mul(om.matrix()) * cp;
    }
    WeavingInstance::new(
        w.lambda().clone(),
        w.omega().clone(),
        w.controls().clone(),
        KOperator::new(OperatorMatrix::from_matrix(k)?)?,
    )
}

/// Gaussian local frames with `d_j + extra` vectors for every codomain of `w`.
pub fn random_atoms(seed: u64, w: &WeavingInstance, extra: usize, tol: &Tolerances) -> Result<AtomicSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut local = |dims: Vec<usize>| -> Vec<Vec<CVector>> {
        dims.into_iter()
            .map(|d| (0..d + extra).map(|_| CVector::from_fn(d, |_, _| gaussian(&mut rng))).collect())
            .collect()
    };
    let h = local(w.lambda().codomain_dims());
    let g = local(w.omega().codomain_dims());
    AtomicSystem::new(h, g, tol)
}
