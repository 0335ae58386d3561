//! Problem files and JSON reports.
//!
//! A problem file is a JSON object:
//!
//! ```json
//! {
//!   "ambient_dim": 2,
//!   "controls": { "C": M, "Cprime": M },
//!   "k_operator": M,
//!   "lambda": [M, ...],
//!   "omega": [M, ...]
//! }
//! ```
//!
//! where each `M` is `{"rows": r, "cols": c, "entries": [[re, im], ...]}` in
//! row-major order. `omega` is optional for single-instance commands; the
//! optional `expansion`, `stated_bounds` and `atoms` sections feed the
//! theorem checkers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::FrameError;
use crate::model::{ControlPair, ControlledInstance, GFrameFamily, KOperator, WeavingInstance};
use crate::numerics::{CVector, OperatorMatrix, Tolerances, C64};
use crate::theorems::{AtomicSystem, ScalarExpansion, StatedBounds};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed problem file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid `{field}`: {source}")]
    Validation {
        field: String,
        source: FrameError,
    },
}

impl IoError {
    /// 2 for unreadable or malformed input, 3 for input that fails validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            IoError::Validation { .. } => 3,
            _ => 2,
        }
    }
}

fn invalid(field: impl Into<String>) -> impl FnOnce(FrameError) -> IoError {
    let field = field.into();
    move |source| IoError::Validation { field, source }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixRecord {
    pub fn from_operator(op: &OperatorMatrix) -> Self {
        Self {
            rows: op.rows(),
            cols: op.cols(),
            entries: op.row_major_entries().into_iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn to_operator(&self) -> Result<OperatorMatrix, FrameError> {
        let entries = self.entries.iter().map(|&[re, im]| C64::new(re, im)).collect();
        OperatorMatrix::new(self.rows, self.cols, entries)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsRecord {
    #[serde(rename = "C")]
    pub c: MatrixRecord,
    #[serde(rename = "Cprime")]
    pub c_prime: MatrixRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientRecord {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub beta: f64,
}

/// Scalar expansion; indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionRecord {
    pub basis: Vec<Vec<[f64; 2]>>,
    pub coefficients: Vec<CoefficientRecord>,
    pub m_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatedBoundsRecord {
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub omega_upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsRecord {
    pub h: Vec<Vec<Vec<[f64; 2]>>>,
    pub w: Vec<Vec<Vec<[f64; 2]>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub ambient_dim: usize,
    pub controls: ControlsRecord,
    pub k_operator: MatrixRecord,
    pub lambda: Vec<MatrixRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<MatrixRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stated_bounds: Option<StatedBoundsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<AtomsRecord>,
}

fn pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn vector(pairs: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(pairs.len(), pairs.iter().map(|&[re, im]| C64::new(re, im)))
}

fn members(records: &[MatrixRecord], n: usize, field: &str) -> Result<GFrameFamily, IoError> {
    let ops = records
        .iter()
        .enumerate()
        .map(|(j, r)| r.to_operator().map_err(invalid(format!("{field}[{j}]"))))
        .collect::<Result<Vec<_>, _>>()?;
    GFrameFamily::new(n, ops).map_err(invalid(field))
}

/// A validated problem file.
#[derive(Clone, Debug)]
pub struct Problem {
    pub lambda: GFrameFamily,
    pub omega: Option<GFrameFamily>,
    pub controls: ControlPair,
    pub k_op: KOperator,
    pub expansion: Option<ScalarExpansion>,
    pub stated: Option<StatedBounds>,
    pub atoms: Option<AtomicSystem>,
    pub digest: String,
}

impl Problem {
    pub fn instance(&self, omega_side: bool, tol: &Tolerances) -> Result<ControlledInstance, IoError> {
        let (family, field) = match (&self.omega, omega_side) {
            (Some(omega), true) => (omega.clone(), "omega"),
            (None, true) => {
                return Err(IoError::Validation {
                    field: "omega".into(),
                    source: FrameError::InvalidParameter("the problem has no omega family".into()),
                })
            }
            (_, false) => (self.lambda.clone(), "lambda"),
        };
        ControlledInstance::from_parts(family, self.controls.clone(), self.k_op.clone(), tol).map_err(invalid(field))
    }

    pub fn weave(&self) -> Result<WeavingInstance, IoError> {
        let omega = self.omega.clone().ok_or_else(|| IoError::Validation {
            field: "omega".into(),
            source: FrameError::InvalidParameter("weaving needs an omega family".into()),
        })?;
        WeavingInstance::new(self.lambda.clone(), omega, self.controls.clone(), self.k_op.clone()).map_err(invalid("omega"))
    }
}

impl ProblemFile {
    pub fn from_weave(w: &WeavingInstance) -> Self {
        let mut file = Self::from_parts(w.lambda(), w.controls(), w.k_op());
        file.omega = Some(w.omega().members().iter().map(MatrixRecord::from_operator).collect());
        file
    }

    pub fn from_parts(lambda: &GFrameFamily, controls: &ControlPair, k_op: &KOperator) -> Self {
        Self {
            ambient_dim: lambda.ambient_dim(),
            controls: ControlsRecord {
                c: MatrixRecord::from_operator(controls.c()),
                c_prime: MatrixRecord::from_operator(controls.c_prime()),
            },
            k_operator: MatrixRecord::from_operator(k_op.k()),
            lambda: lambda.members().iter().map(MatrixRecord::from_operator).collect(),
            omega: None,
            expansion: None,
            stated_bounds: None,
            atoms: None,
        }
    }

    pub fn with_expansion(mut self, exp: &ScalarExpansion) -> Self {
        self.expansion = Some(ExpansionRecord {
            basis: exp.basis().iter().map(pairs).collect(),
            coefficients: exp
                .coefficients()
                .iter()
                .map(|(&(i, j, k), &beta)| CoefficientRecord {
                    i: i + 1,
                    j: j + 1,
                    k: k + 1,
                    beta,
                })
                .collect(),
            m_bound: exp.m_bound(),
        });
        self
    }

    pub fn with_stated_bounds(mut self, stated: StatedBounds) -> Self {
        self.stated_bounds = Some(StatedBoundsRecord {
            lambda_lower: stated.lambda_lower,
            lambda_upper: stated.lambda_upper,
            omega_upper: stated.omega_upper,
        });
        self
    }

    pub fn with_atoms(mut self, atoms: &AtomicSystem) -> Self {
        let side = |locals: &[Vec<CVector>]| locals.iter().map(|l| l.iter().map(pairs).collect()).collect();
        self.atoms = Some(AtomsRecord {
            h: side(atoms.local_h()),
            w: side(atoms.local_w()),
        });
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    /// SHA-256 of the compact serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("problem files serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<Problem, IoError> {
        let n = self.ambient_dim;
        let controls = ControlPair::new(
            self.controls.c.to_operator().map_err(invalid("controls.C"))?,
            self.controls.c_prime.to_operator().map_err(invalid("controls.Cprime"))?,
            tol,
        )
        .map_err(invalid("controls"))?;
        if controls.dim() != n {
            return Err(IoError::Validation {
                field: "controls".into(),
                source: FrameError::DimensionMismatch {
                    context: "ambient dimension",
                    expected: n,
                    actual: controls.dim(),
                },
            });
        }
        let k_op = KOperator::new(self.k_operator.to_operator().map_err(invalid("k_operator"))?)
            .map_err(invalid("k_operator"))?;
        if k_op.dim() != n {
            return Err(IoError::Validation {
                field: "k_operator".into(),
                source: FrameError::DimensionMismatch {
                    context: "ambient dimension",
                    expected: n,
                    actual: k_op.dim(),
                },
            });
        }
        let lambda = members(&self.lambda, n, "lambda")?;
        let omega = self.omega.as_deref().map(|o| members(o, n, "omega")).transpose()?;

        let expansion = self
            .expansion
            .as_ref()
            .map(|e| {
                let mut coefficients = BTreeMap::new();
                for c in &e.coefficients {
                    if c.i == 0 || c.j == 0 || c.k == 0 {
                        return Err(IoError::Validation {
                            field: "expansion.coefficients".into(),
                            source: FrameError::InvalidParameter("indices are 1-based".into()),
                        });
                    }
                    coefficients.insert((c.i - 1, c.j - 1, c.k - 1), c.beta);
                }
                let basis = e.basis.iter().map(|v| vector(v)).collect();
                ScalarExpansion::new(basis, coefficients, e.m_bound).map_err(invalid("expansion"))
            })
            .transpose()?;

        let atoms = self
            .atoms
            .as_ref()
            .map(|a| {
                let side = |s: &[Vec<Vec<[f64; 2]>>]| -> Vec<Vec<CVector>> {
                    s.iter().map(|l| l.iter().map(|v| vector(v)).collect()).collect()
                };
                AtomicSystem::new(side(&a.h), side(&a.w), tol).map_err(invalid("atoms"))
            })
            .transpose()?;

        Ok(Problem {
            lambda,
            omega,
            controls,
            k_op,
            expansion,
            stated: self.stated_bounds.map(|s| StatedBounds {
                lambda_lower: s.lambda_lower,
                lambda_upper: s.lambda_upper,
                omega_upper: s.omega_upper,
            }),
            atoms,
            digest: self.digest(),
        })
    }
}

pub fn read_problem_file(path: &Path) -> Result<ProblemFile, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn parse_problem(path: &Path, tol: &Tolerances) -> Result<Problem, IoError> {
    read_problem_file(path)?.validate(tol)
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomically(path: &Path, contents: &str) -> Result<(), IoError> {
    let err = |source| IoError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}

/// Common envelope of every command's output.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub verdict: String,
    /// `null` when the lower bound is vacuous (`K = 0`).
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_subset: Option<Vec<usize>>,
    pub tolerances: Tolerances,
    pub instance_digest: String,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// `None` for non-finite values.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
