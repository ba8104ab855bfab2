//! Rank-1 (star) solution and its optimality certificate.
//!
//! When `theta_1 <= Σ_{i>=2} theta_i` the star decomposition `Σt = ααᵀ`,
//! `D = diag(1 - alpha_i^2)` is optimal. Optimality is witnessed by a matrix
//! `T = V·B` whose columns lie in the null space of `ααᵀ` and whose squared
//! row norms equal `1 / (1 - alpha_i^2)`. `V` is the explicit null-space
//! basis plus one signed combination column, and `B` is diagonal.
//!
//! Everything here works in canonical order.

use serde::Serialize;

use crate::error::{CmdfaError, Result};
use crate::matrix::Matrix;
use crate::model::{
    classify, default_eps_class, CmdfaSolution, DominanceClass, NondominantInfo, Regime, StarModel,
};

const ROW_TOL: f64 = 1e-10;

/// Signs for `theta_2..theta_n` together with the resulting `beta_nn`.
///
/// `theta_signs[i - 1] = s_i` where the combination column uses
/// `c_i alpha_i = s_i theta_i`; the sign applied to the column entry itself is
/// `c̃_i = s_i · sign(alpha_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignChoice {
    pub theta_signs: Vec<f64>,
    pub beta_nn: f64,
    /// The balanced signing hit a zero denominator and the smallest element's
    /// sign was flipped.
    pub perturbed: bool,
}

/// Null-space basis `V` of `ααᵀ`: columns `v_1..v_{n-1}` and a last column
/// that combines them with weights `c_i = c̃_i / sqrt(1 - alpha_i^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullBasis {
    pub v: Matrix,
    pub c_tilde: Vec<f64>,
}

/// Diagonal of `β = BBᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDiag {
    pub beta: Vec<f64>,
}

fn beta_nn_for(theta: &[f64], signs: &[f64]) -> (f64, f64, f64) {
    let rest_sq: f64 = theta[1..].iter().map(|t| t * t).sum();
    let signed: f64 = theta[1..].iter().zip(signs).map(|(t, s)| t * s).sum();
    let num = theta[0] * theta[0] - rest_sq;
    let den = signed * signed - rest_sq;
    (num / den, den, rest_sq)
}

/// Balanced signing: walk `theta_2 >= theta_3 >= ...` and give each entry the
/// sign opposing the running partial sum, so `|Σ s_i theta_i| <= theta_2`.
fn balanced_signs(rest: &[f64]) -> Vec<f64> {
    let mut partial = 0.0;
    rest.iter()
        .map(|&t| {
            let s = if partial > 0.0 { -1.0 } else { 1.0 };
            partial += s * t;
            s
        })
        .collect()
}

/// Picks signs so that `beta_nn` lands in `[0, 1]`.
///
/// Aligned signs when `theta_1^2 >= Σ_{i>=2} theta_i^2`, balanced signs
/// otherwise. `theta` must be canonical and non-dominant with `n >= 3`.
pub fn choose_signs(theta: &[f64]) -> Result<SignChoice> {
    let n = theta.len();
    if n < 3 {
        return Err(CmdfaError::Construction(format!(
            "sign selection needs n >= 3 (got {n}); use the boundary certificate"
        )));
    }
    let rest = &theta[1..];
    let rest_sq: f64 = rest.iter().map(|t| t * t).sum();
    let mut signs = if theta[0] * theta[0] >= rest_sq {
        vec![1.0; n - 1]
    } else {
        balanced_signs(rest)
    };

    let (mut beta_nn, den, scale) = beta_nn_for(theta, &signs);
    let mut perturbed = false;
    if den.abs() <= 1e-14 * scale {
        let last = signs.len() - 1;
        signs[last] = -signs[last];
        perturbed = true;
        beta_nn = beta_nn_for(theta, &signs).0;
    }
    // clamp rounding noise at the ends of the interval
    let slack = 1e-12;
    if !(beta_nn >= -slack && beta_nn <= 1.0 + slack) {
        return Err(CmdfaError::Construction(format!(
            "no valid signing: beta_nn = {beta_nn} (is theta dominant?)"
        )));
    }
    Ok(SignChoice {
        theta_signs: signs,
        beta_nn: beta_nn.clamp(0.0, 1.0),
        perturbed,
    })
}

/// Builds `V` for sign vector `c_tilde` (entries for canonical indices `1..n`).
pub fn null_basis(model: &StarModel, c_tilde: &[f64]) -> NullBasis {
    let n = model.n();
    let alpha = &model.alpha;
    let mut v = Matrix::zeros(n, n);
    let mut combo = 0.0;
    for i in 1..n {
        v[(0, i - 1)] = -alpha[i] / alpha[0];
        v[(i, i - 1)] = 1.0;
        let c = c_tilde[i - 1] / (1.0 - alpha[i] * alpha[i]).sqrt();
        v[(i, n - 1)] = c;
        combo += c * alpha[i];
    }
    v[(0, n - 1)] = -combo / alpha[0];
    NullBasis {
        v,
        c_tilde: c_tilde.to_vec(),
    }
}

/// `beta_ii = (1 - beta_nn) / (1 - alpha_{i+1}^2)` for `i < n`, then `beta_nn`.
pub fn beta_diag(model: &StarModel, beta_nn: f64) -> BetaDiag {
    let mut beta: Vec<f64> = model.alpha[1..]
        .iter()
        .map(|a| (1.0 - beta_nn) / (1.0 - a * a))
        .collect();
    beta.push(beta_nn);
    BetaDiag { beta }
}

fn check_rows(model: &StarModel, t: &Matrix, tol: f64) -> Result<()> {
    for (i, a) in model.alpha.iter().enumerate() {
        let rel = (t.row_norm_sq(i) * (1.0 - a * a) - 1.0).abs();
        if rel > tol {
            return Err(CmdfaError::Construction(format!(
                "row {i} norm residual {rel:e} exceeds {tol:e}"
            )));
        }
    }
    Ok(())
}

/// Certificate `T = V·B` for a signing from [`choose_signs`].
///
/// When `beta_nn = 1` the first `n - 1` columns vanish and only the
/// combination column is returned.
pub fn build_certificate(model: &StarModel, signs: &SignChoice) -> Result<Matrix> {
    let n = model.n();
    if signs.theta_signs.len() + 1 != n {
        return Err(CmdfaError::Construction(
            "sign vector length mismatch".into(),
        ));
    }
    if !(0.0..=1.0).contains(&signs.beta_nn) {
        return Err(CmdfaError::Construction(format!(
            "beta_nn = {} outside [0, 1]",
            signs.beta_nn
        )));
    }
    let c_tilde: Vec<f64> = signs
        .theta_signs
        .iter()
        .zip(&model.signs[1..])
        .map(|(s, sgn)| s * sgn)
        .collect();
    let basis = null_basis(model, &c_tilde);
    let beta = beta_diag(model, signs.beta_nn);

    let t = if signs.beta_nn >= 1.0 {
        Matrix::column(&basis.v.col(n - 1))
    } else {
        let b: Vec<f64> = beta.beta.iter().map(|x| x.sqrt()).collect();
        basis.v.matmul(&Matrix::from_diagonal(&b))
    };
    check_rows(model, &t, ROW_TOL)?;
    Ok(t)
}

/// Single-column certificate for the boundary `theta_1 = Σ_{i>=2} theta_i`,
/// where the admissible null space is one-dimensional.
pub fn boundary_certificate(model: &StarModel) -> Result<Matrix> {
    let n = model.n();
    let basis = null_basis(model, &model.signs[1..]);
    let t = Matrix::column(&basis.v.col(n - 1));
    let tol = ROW_TOL + 4.0 * model.margin().abs() / model.theta[0];
    check_rows(model, &t, tol)?;
    Ok(t)
}

/// Rank-1 solution for a non-dominant or boundary model.
pub fn solve_nondominant(model: &StarModel) -> Result<CmdfaSolution> {
    let class = classify(model, default_eps_class(model));
    solve_with_class(model, class)
}

pub(crate) fn solve_with_class(model: &StarModel, class: DominanceClass) -> Result<CmdfaSolution> {
    let d: Vec<f64> = model.alpha.iter().map(|a| 1.0 - a * a).collect();
    let (certificate, signs) = match class.regime {
        Regime::Dominant => {
            return Err(CmdfaError::Regime(format!(
                "star solution is not optimal for a dominant model (margin {})",
                class.margin
            )))
        }
        Regime::Boundary => (boundary_certificate(model)?, None),
        Regime::NonDominant => {
            let signs = choose_signs(&model.theta)?;
            (build_certificate(model, &signs)?, Some(signs))
        }
    };
    let mut sol = CmdfaSolution::from_canonical(model, class, &d, 1, &certificate);
    sol.nondominant = Some(NondominantInfo { signs });
    Ok(sol)
}
