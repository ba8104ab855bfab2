//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use crate::error::{CmdfaError, Result};
use crate::matrix::Matrix;

/// Largest dimension accepted by [`sym_eigen`].
pub const MAX_DIM: usize = 256;
const MAX_SWEEPS: usize = 50;
const REL_OFF_TOL: f64 = 1e-13;

/// Eigen-decomposition `M = V diag(values) Vᵀ` with ascending eigenvalues.
/// Column `k` of `vectors` is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.col(k)
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
///
/// Runs cyclic Jacobi sweeps until the off-diagonal Frobenius norm drops to
/// `1e-13 * ‖M‖_F`. Only the upper triangle is trusted to be symmetric up to
/// rounding; inputs that are visibly asymmetric are rejected.
pub fn sym_eigen(m: &Matrix) -> Result<SymEigen> {
    if !m.is_square() || m.rows() == 0 {
        return Err(CmdfaError::Domain(format!(
            "sym_eigen needs a non-empty square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    if n > MAX_DIM {
        return Err(CmdfaError::Domain(format!(
            "sym_eigen supports n <= {MAX_DIM}, got {n}"
        )));
    }
    let scale = m.frobenius_norm();
    if !scale.is_finite() {
        return Err(CmdfaError::Domain("matrix has non-finite entries".into()));
    }
    if m.max_abs_asymmetry() > 1e-10 * scale.max(1.0) {
        return Err(CmdfaError::Domain("matrix is not symmetric".into()));
    }

    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let target = REL_OFF_TOL * scale;

    let mut converged = off_diagonal_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(CmdfaError::Convergence(format!(
                "Jacobi did not converge in {MAX_SWEEPS} sweeps (off-norm {:e})",
                off_diagonal_norm(&a)
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_diagonal_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, k)] = v[(i, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    sym_eigen(m).map(|e| e.values)
}

/// Annihilates `a[(p, q)]` with a plane rotation and accumulates it into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = a.rows();
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let tau = (aqq - app) / (2.0 * apq);
    // smaller root of t^2 + 2 tau t - 1 = 0
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
