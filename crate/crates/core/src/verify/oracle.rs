//! Brute-force minimization of `-Σ log d_i` over `Σx - diag(d) ⪰ 0`.
//!
//! A grid is laid over the first `n - 1` coordinates; for each grid point
//! the last coordinate is pushed to the largest feasible value by bisection
//! on the eigenvalue test (the objective is decreasing in every `d_i`, so the
//! best point always sits on the feasibility boundary). The best grid point
//! is then refined by zooming in by a factor of 10; at each level the window
//! is re-centred until the incumbent stops improving, which lets the search
//! walk along the non-smooth ridge of the boundary. Nothing here uses the
//! analytic solution, so it serves as an independent cross-check.

use serde::Serialize;

use crate::error::{CmdfaError, Result};
use crate::model::StarCovariance;
use crate::verify::eigen::sym_eigenvalues;

/// Largest dimension the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 3;
const PSD_SLACK: f64 = 1e-12;
const EDGE_BISECTIONS: usize = 52;
const ZOOM: f64 = 10.0;
const ZOOM_HALF_WIDTH: i32 = 10;
const MAX_RECENTRES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub d: Vec<f64>,
    /// `-Σ log d_i` at `d`.
    pub objective: f64,
    /// Grid step of the final refinement level.
    pub final_step: f64,
}

fn feasible(sigma_x: &StarCovariance, d: &[f64]) -> Result<bool> {
    let m = sigma_x.entries.sub_diagonal(d);
    Ok(sym_eigenvalues(&m)?[0] >= -PSD_SLACK)
}

/// Largest feasible last coordinate given the leading ones, if any.
fn edge_value(sigma_x: &StarCovariance, lead: &[f64]) -> Result<Option<f64>> {
    let mut d = lead.to_vec();
    d.push(0.0);
    if !feasible(sigma_x, &d)? {
        return Ok(None);
    }
    let last = d.len() - 1;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..EDGE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        d[last] = mid;
        if feasible(sigma_x, &d)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo > 0.0).then_some(lo))
}

fn search(sigma_x: &StarCovariance, axes: &[Vec<f64>]) -> Result<Option<(Vec<f64>, f64)>> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut idx = vec![0usize; axes.len()];
    if axes.iter().any(|a| a.is_empty()) {
        return Ok(None);
    }
    loop {
        let lead: Vec<f64> = idx.iter().zip(axes).map(|(&k, ax)| ax[k]).collect();
        if let Some(last) = edge_value(sigma_x, &lead)? {
            let mut d = lead;
            d.push(last);
            let obj: f64 = -d.iter().map(|v| v.ln()).sum::<f64>();
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((d, obj));
            }
        }
        // odometer increment over the grid
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(best);
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Grid search for the minimum-determinant diagonal (n <= 3).
///
/// The coarse grid has step `grid0` starting half a step in from 0; each of
/// the `refinements` levels re-grids `±grid0_level` around the incumbent with
/// a ten times finer step.
pub fn brute_force_oracle(
    sigma_x: &StarCovariance,
    grid0: f64,
    refinements: usize,
) -> Result<OracleResult> {
    let n = sigma_x.dim();
    if !(2..=MAX_ORACLE_DIM).contains(&n) {
        return Err(CmdfaError::Domain(format!(
            "oracle supports 2 <= n <= {MAX_ORACLE_DIM}, got {n}"
        )));
    }
    if !(grid0 > 0.0 && grid0 < 1.0) {
        return Err(CmdfaError::Domain(format!(
            "grid step {grid0} must be in (0, 1)"
        )));
    }
    let coarse: Vec<f64> = (0..)
        .map(|k| grid0 * (k as f64 + 0.5))
        .take_while(|v| *v < 1.0)
        .collect();
    let axes = vec![coarse; n - 1];
    let (mut best, mut objective) = search(sigma_x, &axes)?
        .ok_or_else(|| CmdfaError::Infeasible("no feasible grid point".into()))?;

    let mut step = grid0;
    for _ in 0..refinements {
        step /= ZOOM;
        for _ in 0..MAX_RECENTRES {
            let axes: Vec<Vec<f64>> = best[..n - 1]
                .iter()
                .map(|&c| {
                    (-ZOOM_HALF_WIDTH..=ZOOM_HALF_WIDTH)
                        .map(|k| c + step * k as f64)
                        .filter(|v| *v > 0.0 && *v < 1.0)
                        .collect()
                })
                .collect();
            match search(sigma_x, &axes)? {
                Some((d, obj)) if obj < objective => {
                    best = d;
                    objective = obj;
                }
                _ => break,
            }
        }
    }
    Ok(OracleResult {
        d: best,
        objective,
        final_step: step,
    })
}
