//! Mutual information between the observables and the latent factors.
//!
//! For a decomposition `Σx = Σt + D` the information carried by the latent
//! factors is `I = ½ ln(|Σx| / Π D_ii)` nats. The star decomposition gives
//! `I_star = ½ ln(1 + Σ theta_i^2)`; the CMDFA decomposition gives the
//! minimum. In the dominant regime the analytic bounds on `X₁*` are pushed
//! through the same recovery map to get `I_up` and `I_low`.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::dominant::{bounds, recover_a};
use crate::error::{CmdfaError, Result};
use crate::model::{solve, Regime, SolveOptions, StarCovariance, StarModel};

/// `½ ln(|Σx| / Π D_ii)` in nats.
pub fn mutual_info(sigma_x: &StarCovariance, d: &[f64]) -> Result<f64> {
    if d.len() != sigma_x.dim() {
        return Err(CmdfaError::Domain(format!(
            "expected {} diagonal entries, got {}",
            sigma_x.dim(),
            d.len()
        )));
    }
    if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(CmdfaError::Domain(format!("D entry {bad} must be > 0")));
    }
    let log_d: f64 = d.iter().map(|v| v.ln()).sum();
    Ok(0.5 * (sigma_x.log_determinant() - log_d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiGaps {
    pub star_minus_cmdfa: f64,
    pub star_minus_up: f64,
    pub star_minus_low: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiReport {
    pub i_star: f64,
    pub i_cmdfa: f64,
    pub i_up: f64,
    pub i_low: f64,
    pub gaps: MiGaps,
    /// Whether `i_low <= i_cmdfa <= i_up` held on this instance. Not
    /// guaranteed in general.
    pub bounds_ordered: bool,
}

impl MiReport {
    fn new(i_star: f64, i_cmdfa: f64, i_up: f64, i_low: f64) -> Self {
        Self {
            i_star,
            i_cmdfa,
            i_up,
            i_low,
            gaps: MiGaps {
                star_minus_cmdfa: i_star - i_cmdfa,
                star_minus_up: i_star - i_up,
                star_minus_low: i_star - i_low,
            },
            bounds_ordered: i_low <= i_cmdfa && i_cmdfa <= i_up,
        }
    }

    /// Same report in bits.
    pub fn to_bits(&self) -> Self {
        Self::new(
            self.i_star / LN_2,
            self.i_cmdfa / LN_2,
            self.i_up / LN_2,
            self.i_low / LN_2,
        )
    }
}

fn surrogate_info(model: &StarModel, cov: &StarCovariance, x1: f64) -> Result<f64> {
    let aux = recover_a(model, x1)?;
    let d: Vec<f64> = aux.a.iter().map(|a| 1.0 - a).collect();
    mutual_info(cov, &d)
}

/// Star, CMDFA and bound-derived mutual informations for a model.
pub fn mi_report(model: &StarModel, opts: &SolveOptions) -> Result<MiReport> {
    // canonical order throughout; the determinant is permutation invariant
    let cov = StarCovariance::from_alpha(&model.alpha);
    let star_d: Vec<f64> = model.alpha.iter().map(|a| 1.0 - a * a).collect();
    let i_star = mutual_info(&cov, &star_d)?;

    let sol = solve(model, opts)?;
    match (&sol.dominant, sol.regime()) {
        (Some(aux), Regime::Dominant) => {
            let d: Vec<f64> = aux.a.iter().map(|a| 1.0 - a).collect();
            let i_cmdfa = mutual_info(&cov, &d)?;
            let b = bounds(&model.theta)?;
            let i_up = surrogate_info(model, &cov, b.x1_up)?;
            let i_low = surrogate_info(model, &cov, b.x1_low)?;
            Ok(MiReport::new(i_star, i_cmdfa, i_up, i_low))
        }
        _ => Ok(MiReport::new(i_star, i_star, i_star, i_star)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    /// Dominant, but too close to the boundary for the rank n-1 path.
    NearBoundary,
    NotDominant,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta1: f64,
    pub margin: f64,
    pub status: RowStatus,
    pub report: Option<MiReport>,
    pub message: Option<String>,
}

/// One row of a `theta_1` sweep with the remaining SNR values fixed.
pub fn sweep_row(theta1: f64, theta_rest: &[f64], opts: &SolveOptions) -> SweepRow {
    let margin = theta1 - theta_rest.iter().sum::<f64>();
    let row = |status, report, message| SweepRow {
        theta1,
        margin,
        status,
        report,
        message,
    };
    let mut theta = Vec::with_capacity(theta_rest.len() + 1);
    theta.push(theta1);
    theta.extend_from_slice(theta_rest);
    let model = match StarModel::from_theta(&theta) {
        Ok(m) => m,
        Err(e) => return row(RowStatus::Failed, None, Some(e.to_string())),
    };
    if !(margin > opts.eps_for(&model)) {
        return row(
            RowStatus::NotDominant,
            None,
            Some("row is not dominant".into()),
        );
    }
    if margin < opts.near_boundary_rel * theta1 {
        return row(
            RowStatus::NearBoundary,
            None,
            Some("row is too close to the boundary".into()),
        );
    }
    match mi_report(&model, opts) {
        Ok(r) => row(RowStatus::Ok, Some(r), None),
        Err(e) => row(RowStatus::Failed, None, Some(e.to_string())),
    }
}

/// Evaluates [`sweep_row`] for every grid point, ordered by `theta_1`.
pub fn sweep_theta1(theta_rest: &[f64], theta1_grid: &[f64], opts: &SolveOptions) -> Vec<SweepRow> {
    let mut grid = theta1_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&t| sweep_row(t, theta_rest, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::canonicalize;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn star_information_equal_loadings() {
        let cov = StarCovariance::from_alpha(&[0.5, 0.5, 0.5]);
        let i = mutual_info(&cov, &[0.75; 3]).unwrap();
        assert!(close(i, 0.5 * 2f64.ln(), 1e-14));
        assert!(close(i, 0.346574, 1e-6));
    }

    #[test]
    fn bivariate_common_information() {
        let cov = StarCovariance::from_alpha(&[0.8, 0.3]);
        let i = mutual_info(&cov, &[0.76, 0.76]).unwrap();
        assert!(close(i, 0.244774, 1e-6));
        let rho: f64 = 0.24;
        assert!(close(i, 0.5 * ((1.0 + rho) / (1.0 - rho)).ln(), 1e-14));
        let i_star = mutual_info(&cov, &[0.36, 0.91]).unwrap();
        assert!(close(i_star, 0.528318, 1e-6));
    }

    #[test]
    fn mutual_info_rejects_nonpositive_diagonal() {
        let cov = StarCovariance::from_alpha(&[0.8, 0.3]);
        assert!(matches!(
            mutual_info(&cov, &[0.0, 0.5]),
            Err(CmdfaError::Domain(_))
        ));
        assert!(mutual_info(&cov, &[0.5]).is_err());
    }

    #[test]
    fn report_collapses_when_non_dominant() {
        let r = mi_report(
            &canonicalize(&[0.5, 0.5, 0.5]).unwrap(),
            &SolveOptions::default(),
        )
        .unwrap();
        for v in [r.i_star, r.i_cmdfa, r.i_up, r.i_low] {
            assert!(close(v, 0.346574, 1e-6));
        }
        assert_eq!(r.gaps.star_minus_cmdfa, 0.0);
        assert_eq!(r.gaps.star_minus_up, 0.0);
        assert_eq!(r.gaps.star_minus_low, 0.0);
    }

    #[test]
    fn report_dominant_examples() {
        let r = mi_report(
            &canonicalize(&[0.8, 0.3]).unwrap(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(close(r.i_star, 0.528318, 1e-6));
        assert!(close(r.i_cmdfa, 0.244774, 1e-6));
        assert!(close(r.gaps.star_minus_cmdfa, 0.283544, 1e-6));

        let r = mi_report(
            &canonicalize(&[0.8, 0.3, 0.3]).unwrap(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(r.i_cmdfa < r.i_star);
    }

    #[test]
    fn bits_conversion() {
        let r = mi_report(
            &canonicalize(&[0.5, 0.5, 0.5]).unwrap(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(close(r.to_bits().i_star, 0.5, 1e-14));
    }

    #[test]
    fn sweep_flags_boundary_rows() {
        let rest = [0.314485, 0.314485];
        let sum: f64 = rest.iter().sum();
        let rows = sweep_theta1(
            &rest,
            &[1.0, sum * (1.0 + 1e-9), 0.5],
            &SolveOptions::default(),
        );
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].status, RowStatus::NotDominant);
        assert_eq!(rows[1].status, RowStatus::NearBoundary);
        assert_eq!(rows[2].status, RowStatus::Ok);
        assert!(rows.windows(2).all(|w| w[0].theta1 < w[1].theta1));
    }

    #[test]
    fn sweep_reproduces_trends() {
        let rest = [0.314485, 0.314485];
        let grid: Vec<f64> = (0..=12).map(|k| 0.8 + 0.1 * k as f64).collect();
        let rows = sweep_theta1(&rest, &grid, &SolveOptions::default());
        let reports: Vec<MiReport> = rows.iter().map(|r| r.report.unwrap()).collect();
        for w in reports.windows(2) {
            assert!(w[1].gaps.star_minus_up > w[0].gaps.star_minus_up);
            assert!(w[1].i_up - w[1].i_low > w[0].i_up - w[0].i_low);
        }
    }
}
