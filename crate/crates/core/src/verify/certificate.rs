//! Optimality certificate checks for a candidate diagonal `D`.
//!
//! `D` minimizes `-log det D` subject to `Σx - D ⪰ 0` exactly when
//! `λ_min(Σx - D) = 0` and some `T` has columns in the null space of
//! `Σx - D` with squared row norms `1 / D_ii`.

use serde::Serialize;

use crate::error::{CmdfaError, Result};
use crate::matrix::Matrix;
use crate::model::{canonicalize, CmdfaSolution, StarCovariance};
use crate::nondominant;
use crate::verify::eigen::sym_eigen;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertTolerances {
    /// Bound on `|λ_min(Σx - D)|`; also the threshold for counting rank.
    pub eig: f64,
    /// Bound on the relative row-norm residual `|‖t_i‖² D_ii - 1|`.
    pub row: f64,
    /// Bound on `‖(Σx - D) t‖` per column, multiplied by `n`.
    pub null: f64,
}

impl Default for CertTolerances {
    fn default() -> Self {
        Self {
            eig: 1e-8,
            row: 1e-10,
            null: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub lambda_min: f64,
    pub second_eigenvalue: f64,
    pub rank_sigma_t: usize,
    pub psd: bool,
    pub row_norm_residuals: Vec<f64>,
    pub nullspace_residual: f64,
    pub columns: usize,
    pub passed: bool,
}

impl Certificate {
    pub fn max_row_residual(&self) -> f64 {
        self.row_norm_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks a candidate `(D, T)` pair against the optimality conditions.
///
/// Failures are reported through [`Certificate::passed`]; only malformed
/// inputs (dimension mismatches, non-positive `D`) return an error.
pub fn check_certificate(
    sigma_x: &StarCovariance,
    d: &[f64],
    t: &Matrix,
    tols: &CertTolerances,
) -> Result<Certificate> {
    let n = sigma_x.dim();
    if d.len() != n || t.rows() != n || t.cols() == 0 {
        return Err(CmdfaError::Domain(format!(
            "shape mismatch: n = {n}, |D| = {}, T is {}x{}",
            d.len(),
            t.rows(),
            t.cols()
        )));
    }
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(CmdfaError::Domain(format!("D entry {bad} must be > 0")));
    }
    let sigma_t = sigma_x.entries.sub_diagonal(d);
    let eig = sym_eigen(&sigma_t)?;
    let lambda_min = eig.values[0];
    let second_eigenvalue = eig.values.get(1).copied().unwrap_or(f64::NAN);
    let rank_sigma_t = eig.values.iter().filter(|l| **l > tols.eig).count();
    let psd_tol = 1e-10 * n as f64 * sigma_x.entries.frobenius_norm();
    let psd = lambda_min >= -psd_tol;

    let row_norm_residuals: Vec<f64> = (0..n)
        .map(|i| (t.row_norm_sq(i) * d[i] - 1.0).abs())
        .collect();

    let mut nullspace_residual: f64 = 0.0;
    for j in 0..t.cols() {
        let r = sigma_t.mul_vec(&t.col(j));
        nullspace_residual = nullspace_residual.max(r.iter().map(|v| v * v).sum::<f64>().sqrt());
    }

    let passed = lambda_min.abs() <= tols.eig
        && row_norm_residuals.iter().all(|r| *r <= tols.row)
        && nullspace_residual <= tols.null * n as f64;

    Ok(Certificate {
        lambda_min,
        second_eigenvalue,
        rank_sigma_t,
        psd,
        row_norm_residuals,
        nullspace_residual,
        columns: t.cols(),
        passed,
    })
}

/// Checks the certificate carried by a solver result.
pub fn verify_solution(sol: &CmdfaSolution, tols: &CertTolerances) -> Result<Certificate> {
    let cov = StarCovariance::from_alpha(&sol.alpha);
    check_certificate(&cov, &sol.d, &sol.certificate, tols)
}

const STAR_MATCH_TOL: f64 = 1e-8;

/// Builds a candidate `T` for an externally supplied `D`.
///
/// If `D` is (up to printing precision) the star diagonal `1 - alpha_i^2`
/// and the model admits a rank-1 certificate, the explicit construction is
/// used with each row rescaled to the supplied `D_ii`. Otherwise the
/// single column `t_i = sign(v_i) / sqrt(D_ii)` is formed from the
/// eigenvector `v` of `λ_min(Σx - D)`; row norms then hold by construction
/// and the null-space residual decides.
pub fn certificate_for_diagonal(sigma_x: &StarCovariance, d: &[f64]) -> Result<Matrix> {
    let n = sigma_x.dim();
    if d.len() != n {
        return Err(CmdfaError::Domain(format!(
            "expected {n} diagonal entries, got {}",
            d.len()
        )));
    }
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(CmdfaError::Domain(format!("D entry {bad} must be > 0")));
    }
    let is_star = sigma_x
        .alpha
        .iter()
        .zip(d)
        .all(|(a, di)| (1.0 - a * a - di).abs() <= STAR_MATCH_TOL);
    if is_star {
        let model = canonicalize(&sigma_x.alpha)?;
        if let Ok(sol) = nondominant::solve_nondominant(&model) {
            let mut t = sol.certificate;
            for i in 0..n {
                let scale = (sol.d[i] / d[i]).sqrt();
                for j in 0..t.cols() {
                    t[(i, j)] *= scale;
                }
            }
            return Ok(t);
        }
    }
    let eig = sym_eigen(&sigma_x.entries.sub_diagonal(d))?;
    let v = eig.vector(0);
    let t: Vec<f64> = v
        .iter()
        .zip(d)
        .map(|(vi, di)| {
            let s = if *vi < 0.0 { -1.0 } else { 1.0 };
            s / di.sqrt()
        })
        .collect();
    Ok(Matrix::column(&t))
}
