//! Exact minimum-determinant factor analysis for star-structured Gaussian
//! covariances.
//!
//! Given loadings `alpha` with `0 < |alpha_i| < 1`, the covariance
//! `Σx = ααᵀ + diag(1 - alpha_i^2)` is split as `Σx = Σt + D` with `D`
//! diagonal, `Σt ⪰ 0` and `det D` maximal. With
//! `theta_i = |alpha_i| / sqrt(1 - alpha_i^2)` sorted decreasingly:
//!
//! * `theta_1 <= Σ_{i>=2} theta_i`: the star split `D = diag(1 - alpha_i^2)`
//!   is optimal ([`nondominant`]).
//! * otherwise the optimum has rank n-1 and is found by a scalar root
//!   search ([`dominant`]).
//!
//! Every solution carries a certificate that [`verify`] checks
//! independently.
//!
//! ```
//! use cmdfa_core::{canonicalize, solve, SolveOptions, Regime};
//!
//! let model = canonicalize(&[0.8, 0.3]).unwrap();
//! let sol = solve(&model, &SolveOptions::default()).unwrap();
//! assert_eq!(sol.regime(), Regime::Dominant);
//! assert!((sol.d[0] - 0.76).abs() < 1e-9);
//! ```

// `!(x > y)` comparisons are kept so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dominant;
pub mod error;
pub mod info;
pub mod matrix;
pub mod model;
pub mod nondominant;
pub mod verify;

pub use error::{CmdfaError, Result};
pub use matrix::Matrix;
pub use model::{
    build_covariance, canonicalize, classify, default_eps_class, solve, CmdfaSolution,
    DominanceClass, Regime, SolveOptions, StarCovariance, StarModel,
};
