//! Finite-dimensional verification of controlled K-g-frames and their weavings.
//!
//! A g-frame is a family of operators `Lambda_j : H -> H_j`; the controlled
//! K-variant asks for
//! `A ||K^* f||^2 <= sum_j <Lambda_j C f, Lambda_j C' f> <= B ||f||^2`.
//! Two families are woven when every mixed family
//! `{Lambda_j}_{j in sigma} U {Omega_j}_{j not in sigma}` satisfies this with
//! the same `(A, B)`.
//!
//! The crate certifies optimal bounds, decides wovenness by enumerating
//! `sigma`, and checks the hypotheses of the sufficient conditions for weaving
//! against that exhaustive oracle.

pub mod bounds;
pub mod corpus;
pub mod error;
pub mod frame_ops;
pub mod io;
pub mod model;
pub mod numerics;
pub mod theorems;
pub mod weaving;

pub use bounds::{classical_frame_bounds, is_bessel, optimal_bounds};
pub use error::{FrameError, Result};
pub use model::{
    build_controlled_instance, BoundCertificate, ControlPair, ControlledInstance, GFrameFamily, KOperator, Subset,
    WeavingInstance,
};
pub use numerics::{OperatorMatrix, Tolerances, C64};
pub use weaving::{universal_bounds_exhaustive, universal_bounds_sampled, WeavingCertificate};
