//! Rank n-1 solution for the dominant regime `theta_1 > Σ_{i>=2} theta_i`.
//!
//! The optimal diagonal is `D_ii = 1 - a_i`, where the `a_i` make
//! `Σt = ααᵀ + diag(a_i - alpha_i^2)` singular with a null vector of entries
//! `c_i / sqrt(1 - a_i)`. Writing the free ratio as `μ` and substituting
//! `X_i = sqrt(1/4 + 1/(μ² theta_i²))` turns the stationarity condition into
//! a one-dimensional problem:
//!
//! ```text
//! θ₁²X₁² − θᵢ²Xᵢ² = ¼(θ₁² − θᵢ²)            (i >= 2, fixes Xᵢ given X₁)
//! G(X₁) = θ₁²X₁ − Σ_{i>=2} θᵢ²Xᵢ(X₁) = 1 + ½ Σ θᵢ²
//! ```
//!
//! The root `X₁*` is found by bisection on the analytic bracket
//! `[x1_low, x1_up]`, then `μ²` and the `a_i` are recovered in closed form.
//! All vectors here are in canonical order.

use serde::Serialize;

use crate::error::{CmdfaError, Result};
use crate::matrix::Matrix;
use crate::model::{classify, default_eps_class, CmdfaSolution, Regime, StarModel};
use crate::verify::eigen::sym_eigenvalues;

const MAX_BISECTIONS: usize = 400;
/// Residual bound for `Σ 1/(1 - a_i/alpha_i^2) = 1` on well-conditioned inputs.
pub const STATIONARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominantAux {
    pub x1_star: f64,
    /// `X_1..X_n` on the hyperbola profile through `x1_star`.
    pub x: Vec<f64>,
    pub mu_sq: f64,
    /// `eta_i = (a_i - alpha_i^2) / sqrt(1 - a_i)`.
    pub eta: Vec<f64>,
    pub a: Vec<f64>,
    /// Null-vector signs with `c_i eta_i = μ alpha_i`, `μ > 0`.
    pub c: Vec<f64>,
}

impl DominantAux {
    pub fn mu(&self) -> f64 {
        self.mu_sq.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub x1_low: f64,
    pub x1_up: f64,
}

/// Right-hand side `1 + ½ Σ theta_i^2` of the root equation.
pub fn target(theta: &[f64]) -> f64 {
    1.0 + 0.5 * theta.iter().map(|t| t * t).sum::<f64>()
}

fn check_x1(x1: f64) -> Result<()> {
    if !(x1.is_finite() && x1 >= 0.5) {
        return Err(CmdfaError::Domain(format!("X_1 = {x1} must be >= 1/2")));
    }
    Ok(())
}

/// Point `(X_1, ..., X_n)` on the intersection of the hyperbolic cylinders
/// through `X_1 = x1` (positive branch).
pub fn x_profile(x1: f64, theta: &[f64]) -> Result<Vec<f64>> {
    check_x1(x1)?;
    let lift = theta[0] * theta[0] * (x1 * x1 - 0.25);
    let mut x = Vec::with_capacity(theta.len());
    x.push(x1);
    x.extend(theta[1..].iter().map(|t| (0.25 + lift / (t * t)).sqrt()));
    Ok(x)
}

/// `G(x1) = theta_1^2 x1 - Σ_{i>=2} theta_i^2 X_i(x1)`. Only meaningful for
/// `x1 >= 1/2`; smaller arguments give NaN.
pub fn g_value(x1: f64, theta: &[f64]) -> f64 {
    let lift = theta[0] * theta[0] * (x1 * x1 - 0.25);
    // theta_i^2 X_i written as theta_i sqrt(theta_i^2/4 + lift)
    let rest: f64 = theta[1..]
        .iter()
        .map(|t| t * (0.25 * t * t + lift).sqrt())
        .sum();
    theta[0] * theta[0] * x1 - rest
}

/// `G'(x1) = theta_1^2 (1 - Σ_{i>=2} x1 / X_i)`.
pub fn g_derivative(x1: f64, theta: &[f64]) -> f64 {
    let lift = theta[0] * theta[0] * (x1 * x1 - 0.25);
    let s: f64 = theta[1..]
        .iter()
        .map(|t| x1 / (0.25 + lift / (t * t)).sqrt())
        .sum();
    theta[0] * theta[0] * (1.0 - s)
}

/// Analytic lower and upper bounds on `X₁*`.
pub fn bounds(theta: &[f64]) -> Result<Bounds> {
    let rest_sum: f64 = theta[1..].iter().sum();
    let margin = theta[0] - rest_sum;
    if !(margin > 0.0) {
        return Err(CmdfaError::Regime(format!(
            "bounds need a strictly dominant theta (margin {margin})"
        )));
    }
    let scale = theta[0] * margin;
    let rest_sq: f64 = theta[1..].iter().map(|t| t * t).sum();
    Ok(Bounds {
        x1_low: 0.5 + (1.0 + 0.5 * rest_sq) / scale,
        x1_up: target(theta) / scale,
    })
}

/// Solves `G(X₁) = 1 + ½ Σ theta_i^2` by bisection on the analytic bracket,
/// stopping once the bracket width is below `tol * X₁`.
pub fn solve_x1(theta: &[f64], tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(CmdfaError::Domain(format!(
            "root tolerance {tol} must be > 0"
        )));
    }
    let b = bounds(theta)?;
    let rhs = target(theta);
    let f = |x: f64| g_value(x, theta) - rhs;

    let (mut lo, mut hi) = (b.x1_low, b.x1_up);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return Err(CmdfaError::Convergence(format!(
            "bracket [{lo}, {hi}] does not straddle the root (G - target = {f_lo:e}, {f_hi:e})"
        )));
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    if hi - lo <= tol * mid || hi - lo <= 4.0 * f64::EPSILON * mid {
        Ok(mid)
    } else {
        Err(CmdfaError::Convergence(format!(
            "bisection stalled at width {:e}",
            hi - lo
        )))
    }
}

/// Both roots of `a^2 + a alpha^2 (μ² - 2) + alpha^2 (alpha^2 - μ²) = 0`
/// as `(left, right)`, from the coefficients directly.
pub fn quadratic_roots(alpha_sq: f64, mu_sq: f64) -> (f64, f64) {
    let b = alpha_sq * (mu_sq - 2.0);
    let c = alpha_sq * (alpha_sq - mu_sq);
    let disc = (b * b - 4.0 * c).max(0.0).sqrt();
    // b < 0 whenever mu^2 < 2, so -b + disc has no cancellation
    let q = -0.5 * (b - b.signum() * disc);
    let (r1, r2) = if q == 0.0 { (0.0, -b) } else { (q, c / q) };
    (r1.min(r2), r1.max(r2))
}

/// `Σ 1/(1 - a_i/alpha_i^2) - 1`.
pub fn stationarity_residual(alpha_sq: &[f64], a: &[f64]) -> f64 {
    alpha_sq
        .iter()
        .zip(a)
        .map(|(al, ai)| 1.0 / (1.0 - ai / al))
        .sum::<f64>()
        - 1.0
}

/// `1 + Σ alpha_i^2 / (a_i - alpha_i^2)`: the rank-one secular function of
/// `ααᵀ + diag(a_i - alpha_i^2)` at eigenvalue zero.
pub fn secular_residual(alpha_sq: &[f64], a: &[f64]) -> f64 {
    1.0 + alpha_sq
        .iter()
        .zip(a)
        .map(|(al, ai)| al / (ai - al))
        .sum::<f64>()
}

/// Floating-point error scale of [`stationarity_residual`] at `a`.
fn stationarity_noise(alpha_sq: &[f64], a: &[f64]) -> f64 {
    alpha_sq
        .iter()
        .zip(a)
        .map(|(al, ai)| {
            let term = 1.0 / (1.0 - ai / al);
            term * term
        })
        .sum::<f64>()
        * 8.0
        * f64::EPSILON
}

/// Recovers `μ²`, `a`, `eta` and the signs `c` from a point `x1` on the
/// hyperbola profile. `a_1` takes the left root, `a_i` (i >= 2) the right.
pub fn recover_a(model: &StarModel, x1: f64) -> Result<DominantAux> {
    let theta = &model.theta;
    let x = x_profile(x1, theta)?;
    if x1 <= 0.5 {
        return Err(CmdfaError::Domain("X_1 must be > 1/2".into()));
    }
    let mu_sq = 1.0 / (theta[0] * theta[0] * (x1 * x1 - 0.25));
    let alpha_sq = model.alpha_sq();
    let n = model.n();

    // a_i - alpha_i^2, kept separately to avoid cancellation in eta
    let shift: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                -alpha_sq[0] * mu_sq * (x[0] + 0.5)
            } else {
                alpha_sq[i] * mu_sq * (x[i] - 0.5)
            }
        })
        .collect();
    let a: Vec<f64> = alpha_sq.iter().zip(&shift).map(|(al, s)| al + s).collect();
    if let Some((i, ai)) = a
        .iter()
        .enumerate()
        .find(|(_, ai)| !(**ai > 0.0 && **ai < 1.0))
    {
        return Err(CmdfaError::Numerical(format!(
            "a_{i} = {ai} outside (0, 1) at X_1 = {x1}"
        )));
    }
    let eta: Vec<f64> = shift
        .iter()
        .zip(&a)
        .map(|(s, ai)| s / (1.0 - ai).sqrt())
        .collect();
    let c: Vec<f64> = model
        .alpha
        .iter()
        .zip(&eta)
        .map(|(al, e)| al.signum() * e.signum())
        .collect();
    Ok(DominantAux {
        x1_star: x1,
        x,
        mu_sq,
        eta,
        a,
        c,
    })
}

/// Null vector `t_i = c_i / sqrt(1 - a_i)` of `Σx - D`.
pub fn null_vector(aux: &DominantAux) -> Vec<f64> {
    aux.c
        .iter()
        .zip(&aux.a)
        .map(|(c, a)| c / (1.0 - a).sqrt())
        .collect()
}

/// Rank n-1 solution for a dominant model.
pub fn solve_dominant(model: &StarModel, tol: f64) -> Result<CmdfaSolution> {
    let class = classify(model, default_eps_class(model));
    if class.regime != Regime::Dominant {
        return Err(CmdfaError::Regime(format!(
            "model is {} (margin {}), not dominant",
            class.regime, class.margin
        )));
    }
    let x1 = solve_x1(&model.theta, tol)?;
    let aux = recover_a(model, x1)?;

    let alpha_sq = model.alpha_sq();
    let resid = stationarity_residual(&alpha_sq, &aux.a);
    let allowed = STATIONARITY_TOL + stationarity_noise(&alpha_sq, &aux.a);
    if !(resid.abs() <= allowed) {
        return Err(CmdfaError::Numerical(format!(
            "stationarity residual {resid:e} exceeds {allowed:e}"
        )));
    }

    let d: Vec<f64> = aux.a.iter().map(|a| 1.0 - a).collect();
    let n = model.n();
    let mut sigma_t = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sigma_t[(i, j)] = if i == j {
                aux.a[i]
            } else {
                model.alpha[i] * model.alpha[j]
            };
        }
    }
    let lambda_min = sym_eigenvalues(&sigma_t)?[0];
    if lambda_min < -1e-8 {
        return Err(CmdfaError::Numerical(format!(
            "Σx - D is not PSD (λ_min = {lambda_min:e})"
        )));
    }

    let t = Matrix::column(&null_vector(&aux));
    let mut sol = CmdfaSolution::from_canonical(model, class, &d, n - 1, &t);
    sol.dominant = Some(aux);
    Ok(sol)
}
