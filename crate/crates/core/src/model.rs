//! Star model representation, covariance construction, dominance
//! classification and the top-level solver dispatch.
//!
//! All solver math runs on the canonical representation (loadings sorted by
//! descending magnitude). [`StarModel`] remembers the permutation so results
//! come back in the caller's index order.

use std::fmt;

use serde::Serialize;

use crate::dominant::{self, DominantAux};
use crate::error::{CmdfaError, Result};
use crate::matrix::Matrix;
use crate::nondominant::{self, SignChoice};

/// Canonicalized star loadings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarModel {
    /// Signed loadings in canonical order, `|alpha[0]| >= |alpha[1]| >= ...`.
    pub alpha: Vec<f64>,
    /// `theta[k] = |alpha[k]| / sqrt(1 - alpha[k]^2)`, non-increasing.
    pub theta: Vec<f64>,
    /// `perm[k]` is the caller's index of canonical slot `k` (0-based).
    pub perm: Vec<usize>,
    /// Sign of each canonical loading (`+1.0` or `-1.0`).
    pub signs: Vec<f64>,
}

/// Square root of the signal-to-noise ratio of one star edge.
pub fn snr_sqrt(alpha: f64) -> f64 {
    alpha.abs() / (1.0 - alpha * alpha).sqrt()
}

/// Inverse of [`snr_sqrt`] on the positive branch.
pub fn alpha_from_theta(theta: f64) -> f64 {
    (theta * theta / (1.0 + theta * theta)).sqrt()
}

/// Validates raw loadings and sorts them by descending magnitude.
///
/// Ties keep their original relative order.
pub fn canonicalize(raw_alpha: &[f64]) -> Result<StarModel> {
    if raw_alpha.len() < 2 {
        return Err(CmdfaError::Domain(format!(
            "need at least 2 loadings, got {}",
            raw_alpha.len()
        )));
    }
    for (j, &a) in raw_alpha.iter().enumerate() {
        if !a.is_finite() || a == 0.0 || a.abs() >= 1.0 {
            return Err(CmdfaError::Domain(format!(
                "loading {j} = {a} is outside 0 < |alpha| < 1"
            )));
        }
    }
    let mut perm: Vec<usize> = (0..raw_alpha.len()).collect();
    // stable: ties broken by original index
    perm.sort_by(|&i, &j| raw_alpha[j].abs().total_cmp(&raw_alpha[i].abs()));
    let alpha: Vec<f64> = perm.iter().map(|&i| raw_alpha[i]).collect();
    let theta = alpha.iter().map(|&a| snr_sqrt(a)).collect();
    let signs = alpha.iter().map(|&a| a.signum()).collect();
    Ok(StarModel {
        alpha,
        theta,
        perm,
        signs,
    })
}

impl StarModel {
    /// Model with positive loadings `alpha_i = sqrt(theta_i^2 / (1 + theta_i^2))`.
    pub fn from_theta(theta: &[f64]) -> Result<Self> {
        if let Some(bad) = theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(CmdfaError::Domain(format!("theta entry {bad} must be > 0")));
        }
        let alpha: Vec<f64> = theta.iter().map(|&t| alpha_from_theta(t)).collect();
        canonicalize(&alpha)
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha_sq(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a * a).collect()
    }

    /// Loadings in the caller's original order.
    pub fn user_alpha(&self) -> Vec<f64> {
        self.to_user_vec(&self.alpha)
    }

    pub fn to_user_vec(&self, canonical: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; canonical.len()];
        for (k, &orig) in self.perm.iter().enumerate() {
            out[orig] = canonical[k];
        }
        out
    }

    pub fn to_canonical_vec(&self, user: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&orig| user[orig]).collect()
    }

    /// Permutes the rows of a canonical-order matrix into caller order.
    pub fn to_user_rows(&self, canonical: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(canonical.rows(), canonical.cols());
        for (k, &orig) in self.perm.iter().enumerate() {
            for j in 0..canonical.cols() {
                out[(orig, j)] = canonical[(k, j)];
            }
        }
        out
    }

    /// Permutes rows and columns of a canonical-order symmetric matrix into
    /// caller order.
    pub fn to_user_symmetric(&self, canonical: &Matrix) -> Matrix {
        let mut inverse = vec![0; self.perm.len()];
        for (k, &orig) in self.perm.iter().enumerate() {
            inverse[orig] = k;
        }
        canonical.permute_symmetric(&inverse)
    }

    pub fn theta_rest_sum(&self) -> f64 {
        self.theta[1..].iter().sum()
    }

    pub fn margin(&self) -> f64 {
        self.theta[0] - self.theta_rest_sum()
    }
}

/// Unit-diagonal covariance `Σx` with off-diagonals `alpha_i * alpha_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarCovariance {
    pub alpha: Vec<f64>,
    pub entries: Matrix,
}

impl StarCovariance {
    /// Builds `Σx` directly from loadings in the given order. The loadings
    /// are assumed valid (`0 < |alpha| < 1`).
    pub fn from_alpha(alpha: &[f64]) -> Self {
        let n = alpha.len();
        let mut entries = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                entries[(i, j)] = if i == j { 1.0 } else { alpha[i] * alpha[j] };
            }
        }
        Self {
            alpha: alpha.to_vec(),
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `|Σx| = Π(1 - alpha_i^2) · (1 + Σ theta_i^2)` by the determinant lemma.
    pub fn determinant(&self) -> f64 {
        self.log_determinant().exp()
    }

    pub fn log_determinant(&self) -> f64 {
        let mut log_noise = 0.0;
        let mut snr = 0.0;
        for &a in &self.alpha {
            let noise = 1.0 - a * a;
            log_noise += noise.ln();
            snr += a * a / noise;
        }
        log_noise + snr.ln_1p()
    }
}

/// `Σx` in the caller's index order.
pub fn build_covariance(model: &StarModel) -> StarCovariance {
    StarCovariance::from_alpha(&model.user_alpha())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    NonDominant,
    Boundary,
    Dominant,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::NonDominant => "non-dominant",
            Regime::Boundary => "boundary",
            Regime::Dominant => "dominant",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceClass {
    pub regime: Regime,
    /// `theta_1 - Σ_{i>=2} theta_i`.
    pub margin: f64,
}

/// Default boundary tolerance, `1e-12 * max(1, theta_1)`.
pub fn default_eps_class(model: &StarModel) -> f64 {
    1e-12 * model.theta[0].max(1.0)
}

pub fn classify(model: &StarModel, eps_class: f64) -> DominanceClass {
    let margin = model.margin();
    let regime = if margin > eps_class {
        Regime::Dominant
    } else if margin < -eps_class {
        Regime::NonDominant
    } else {
        Regime::Boundary
    };
    DominanceClass { regime, margin }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Boundary half-width; `None` uses [`default_eps_class`].
    pub eps_class: Option<f64>,
    /// Relative bisection tolerance for the dominant root.
    pub tol_root: f64,
    /// Dominant instances with `margin / theta_1` below this are solved as
    /// boundary instances.
    pub near_boundary_rel: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps_class: None,
            tol_root: 1e-12,
            near_boundary_rel: 1e-6,
        }
    }
}

impl SolveOptions {
    pub fn eps_for(&self, model: &StarModel) -> f64 {
        self.eps_class.unwrap_or_else(|| default_eps_class(model))
    }
}

/// Extra data produced by the rank-1 construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NondominantInfo {
    /// `None` on the boundary path (single aligned column).
    pub signs: Option<SignChoice>,
}

/// A CMDFA decomposition `Σx = Σt + D` in the caller's index order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmdfaSolution {
    pub class: DominanceClass,
    /// Set when a weakly dominant instance was solved on the rank-1 path.
    pub near_boundary: bool,
    pub alpha: Vec<f64>,
    pub d: Vec<f64>,
    pub sigma_t: Matrix,
    pub rank: usize,
    /// Certificate `T`; columns span part of the null space of `Σt`.
    pub certificate: Matrix,
    pub nondominant: Option<NondominantInfo>,
    /// Dominant-regime auxiliaries, in canonical order.
    pub dominant: Option<DominantAux>,
}

impl CmdfaSolution {
    /// Assembles a solution from canonical-order parts.
    pub(crate) fn from_canonical(
        model: &StarModel,
        class: DominanceClass,
        d: &[f64],
        rank: usize,
        certificate: &Matrix,
    ) -> Self {
        let d_user = model.to_user_vec(d);
        let cov = build_covariance(model);
        let sigma_t = cov.entries.sub_diagonal(&d_user);
        CmdfaSolution {
            class,
            near_boundary: false,
            alpha: model.user_alpha(),
            d: d_user,
            sigma_t,
            rank,
            certificate: model.to_user_rows(certificate),
            nondominant: None,
            dominant: None,
        }
    }

    pub fn regime(&self) -> Regime {
        self.class.regime
    }

    pub fn x1_star(&self) -> Option<f64> {
        self.dominant.as_ref().map(|aux| aux.x1_star)
    }
}

/// Solves the CMDFA problem for a star model, picking the rank-1 or
/// rank n-1 construction from the dominance class.
pub fn solve(model: &StarModel, opts: &SolveOptions) -> Result<CmdfaSolution> {
    let class = classify(model, opts.eps_for(model));
    match class.regime {
        Regime::NonDominant | Regime::Boundary => nondominant::solve_with_class(model, class),
        Regime::Dominant if class.margin < opts.near_boundary_rel * model.theta[0] => {
            let forced = DominanceClass {
                regime: Regime::Boundary,
                margin: class.margin,
            };
            let mut sol = nondominant::solve_with_class(model, forced)?;
            sol.class = class;
            sol.near_boundary = true;
            Ok(sol)
        }
        Regime::Dominant => dominant::solve_dominant(model, opts.tol_root),
    }
}
