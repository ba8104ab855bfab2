//! Synthetic samples from the latent star model and loading estimation
//! from covariance matrices.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CmdfaError, Result};
use crate::matrix::Matrix;
use crate::model::{canonicalize, StarCovariance, StarModel};

/// Observations `x = alpha·y + z` with `y ~ N(0, 1)` and independent
/// `z_j ~ N(0, 1 - alpha_j^2)`, in the caller's index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// `m x n`, one observation per row.
    pub samples: Matrix,
    /// Latent draw `y` behind each row.
    pub latent: Vec<f64>,
}

/// Draws `m` observations; identical `(model, m, seed)` give identical batches.
pub fn sample(model: &StarModel, m: usize, seed: u64) -> Result<SampleBatch> {
    if m == 0 {
        return Err(CmdfaError::Domain("sample count must be >= 1".into()));
    }
    let alpha = model.user_alpha();
    let noise_sd: Vec<f64> = alpha.iter().map(|a| (1.0 - a * a).sqrt()).collect();
    let n = alpha.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Matrix::zeros(m, n);
    let mut latent = Vec::with_capacity(m);
    for r in 0..m {
        let y: f64 = rng.sample(StandardNormal);
        latent.push(y);
        for j in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            samples[(r, j)] = alpha[j] * y + noise_sd[j] * z;
        }
    }
    Ok(SampleBatch {
        n,
        m,
        seed,
        samples,
        latent,
    })
}

impl SampleBatch {
    /// Writes the batch as CSV with a `x1,...,xn` header and no index column.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record((1..=self.n).map(|j| format!("x{j}")))?;
        for r in 0..self.m {
            w.write_record(self.samples.row(r).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean-centred sample covariance (divisor `m - 1`).
pub fn empirical_covariance(samples: &Matrix) -> Matrix {
    let (m, n) = (samples.rows(), samples.cols());
    let mean: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|r| samples[(r, j)]).sum::<f64>() / m as f64)
        .collect();
    let mut cov = Matrix::zeros(n, n);
    for r in 0..m {
        let row = samples.row(r);
        for i in 0..n {
            let di = row[i] - mean[i];
            for j in i..n {
                cov[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = if m > 1 { (m - 1) as f64 } else { 1.0 };
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// Loadings fitted to a covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaEstimate {
    pub model: StarModel,
    /// Estimated loadings in the input's index order.
    pub alpha: Vec<f64>,
    /// Largest off-diagonal `|C_ij - alpha_i alpha_j|`.
    pub fit_residual: f64,
}

const CLAMP_EPS: f64 = 1e-9;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Fits star loadings to `C` from the triple identity
/// `alpha_i^2 = C_ij C_ik / C_jk`, taking the median over all pairs `(j, k)`.
///
/// Signs follow `alpha_1 > 0` and `sign(alpha_i) = sign(C_1i)`. Only the
/// off-diagonal entries are read.
pub fn estimate_alpha(c: &Matrix) -> Result<AlphaEstimate> {
    let n = c.rows();
    if !c.is_square() {
        return Err(CmdfaError::Domain(format!(
            "matrix is {}x{}, not square",
            c.rows(),
            c.cols()
        )));
    }
    if n < 3 {
        return Err(CmdfaError::Domain(format!(
            "loadings are identifiable only for n >= 3 (got {n})"
        )));
    }
    let scale = c.frobenius_norm();
    if !scale.is_finite() {
        return Err(CmdfaError::Domain("matrix has non-finite entries".into()));
    }
    if c.max_abs_asymmetry() > 1e-9 * scale.max(1.0) {
        return Err(CmdfaError::Domain("matrix is not symmetric".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if c[(i, j)] == 0.0 {
                return Err(CmdfaError::Domain(format!(
                    "entry ({i}, {j}) is zero; star loadings are not identifiable"
                )));
            }
        }
    }

    let mut alpha = Vec::with_capacity(n);
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let mut ratios = Vec::with_capacity(others.len() * (others.len() - 1) / 2);
        for (p, &j) in others.iter().enumerate() {
            for &k in &others[p + 1..] {
                ratios.push(c[(i, j)] * c[(i, k)] / c[(j, k)]);
            }
        }
        let sq = median(&mut ratios);
        if !sq.is_finite() || sq >= 1.0 {
            return Err(CmdfaError::Domain(format!(
                "estimated alpha_{i}^2 = {sq} is not below 1"
            )));
        }
        let magnitude = sq.max(0.0).sqrt().clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
        let sign = if i == 0 { 1.0 } else { c[(0, i)].signum() };
        alpha.push(sign * magnitude);
    }

    let fitted = StarCovariance::from_alpha(&alpha);
    let mut fit_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                fit_residual = fit_residual.max((c[(i, j)] - fitted.entries[(i, j)]).abs());
            }
        }
    }
    Ok(AlphaEstimate {
        model: canonicalize(&alpha)?,
        alpha,
        fit_residual,
    })
}
