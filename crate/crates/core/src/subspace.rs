//! Signal/noise subspace split of a sample covariance.

use nalgebra::SymmetricEigen;

use crate::array_model::{CMatrix, CovarianceEstimate};
use crate::error::{DoaError, Result};

/// Relative Frobenius asymmetry tolerated before a covariance is rejected.
const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenpairs of `R_hat` sorted by decreasing eigenvalue, split after the
/// `D`-th, plus the noise power estimate `mean(lambda_n)`.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    pub e_s: CMatrix,
    pub lambda_s: Vec<f64>,
    pub e_n: CMatrix,
    pub lambda_n: Vec<f64>,
    pub sigma2_hat: f64,
}

impl SubspaceDecomposition {
    pub fn num_sources(&self) -> usize {
        self.lambda_s.len()
    }

    pub fn dim(&self) -> usize {
        self.e_s.nrows()
    }

    /// `E_s Lambda_s E_s^H + E_n Lambda_n E_n^H`.
    pub fn reconstruct(&self) -> CMatrix {
        weighted_outer(&self.e_s, &self.lambda_s) + weighted_outer(&self.e_n, &self.lambda_n)
    }
}

fn weighted_outer(e: &CMatrix, lambda: &[f64]) -> CMatrix {
    let mut scaled = e.clone();
    for (mut col, &w) in scaled.column_iter_mut().zip(lambda) {
        col.scale_mut(w);
    }
    scaled * e.adjoint()
}

pub fn decompose(r_hat: &CovarianceEstimate, d: usize) -> Result<SubspaceDecomposition> {
    let r = r_hat.matrix();
    let l = r.nrows();
    if d == 0 || d >= l {
        return Err(DoaError::SourceCount { d, len: l });
    }
    let scale = r.norm();
    let asym = (r - r.adjoint()).norm();
    if asym > HERMITIAN_TOL * scale {
        return Err(DoaError::NotHermitian(asym / scale));
    }

    let eig = SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..l).collect();
    // Stable sort: equal eigenvalues keep solver order.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let (sig, noise) = order.split_at(d);
    let e_s = eig.eigenvectors.select_columns(sig);
    let e_n = eig.eigenvectors.select_columns(noise);
    let lambda_s: Vec<f64> = sig.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lambda_n: Vec<f64> = noise.iter().map(|&i| eig.eigenvalues[i]).collect();
    let sigma2_hat = lambda_n.iter().sum::<f64>() / lambda_n.len() as f64;

    Ok(SubspaceDecomposition {
        e_s,
        lambda_s,
        e_n,
        lambda_n,
        sigma2_hat,
    })
}
