//! Stochastic Cramér–Rao bound, a grid-MUSIC reference estimator and the
//! circular mean-squared-error metric.

use std::f64::consts::{PI, TAU};

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::angle::{wrap_difference, wrap_half_open};
use crate::array_model::{
    steering_vector, CMatrix, CoprimeGeometry, CovarianceEstimate, SourceScenario,
};
use crate::error::{DoaError, Result};
use crate::subspace::decompose;

/// Per-source lower bounds on the variance of unbiased estimates of `psi`,
/// in rad^2.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbResult {
    pub bounds: Vec<f64>,
}

/// `CRB = sigma^2/(2K) {Re[(D^H Pi_A^perp D) . (P A^H R^-1 A P)^T]}^-1`,
/// unknown DOAs, source powers and noise power.
pub fn stochastic_crb(
    geom: &CoprimeGeometry,
    scenario: &SourceScenario,
    k: usize,
) -> Result<CrbResult> {
    let sigma2 = scenario.noise_power();
    if !(sigma2 > 0.0) {
        return Err(DoaError::InvalidArgument(
            "the bound requires noise power > 0".into(),
        ));
    }
    if k == 0 {
        return Err(DoaError::InvalidArgument(
            "the bound requires K >= 1".into(),
        ));
    }
    let l = geom.len();
    let d = scenario.num_sources();
    let a = geom.steering_matrix(scenario.doas());

    let gram = a.adjoint() * &a;
    let gram_eig = SymmetricEigen::new(gram.clone());
    let (lo, hi) = gram_eig
        .eigenvalues
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo <= 1e-10 * hi {
        return Err(DoaError::SingularSteering);
    }
    let gram_inv = gram
        .clone()
        .try_inverse()
        .ok_or(DoaError::SingularSteering)?;

    let positions = geom.positions();
    let mut deriv = a.clone();
    for (i, mut row) in deriv.row_iter_mut().enumerate() {
        row *= Complex64::new(0.0, positions[i] as f64);
    }
    let proj_perp = CMatrix::identity(l, l) - &a * gram_inv * a.adjoint();
    let p = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        scenario.powers().iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    // A^H R^-1 A = (G P + sigma^2 I)^-1 G with G = A^H A: a D x D solve that
    // stays well conditioned when sigma^2 is tiny and R is nearly singular.
    let inner = &gram * &p + CMatrix::identity(d, d) * Complex64::new(sigma2, 0.0);
    let a_rinv_a = inner
        .lu()
        .solve(&gram)
        .ok_or_else(|| DoaError::EstimationFailure("model covariance is singular".into()))?;

    let m1 = deriv.adjoint() * proj_perp * &deriv;
    let m2 = &p * a_rinv_a * &p;
    let fim = DMatrix::<f64>::from_fn(d, d, |i, j| (m1[(i, j)] * m2[(j, i)]).re);
    let fim_inv = fim
        .try_inverse()
        .ok_or_else(|| DoaError::EstimationFailure("Fisher information is singular".into()))?;
    let scale = sigma2 / (2.0 * k as f64);
    Ok(CrbResult {
        bounds: (0..d).map(|i| scale * fim_inv[(i, i)]).collect(),
    })
}

/// MUSIC pseudo-spectrum on a uniform grid over `[-pi, pi)` and its peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub grid: Vec<f64>,
    pub spectrum: Vec<f64>,
    /// Refined peak locations, ascending.
    pub peaks: Vec<f64>,
}

/// Grid-MUSIC over the full coprime array.
pub fn grid_music(
    r_hat: &CovarianceEstimate,
    geom: &CoprimeGeometry,
    d: usize,
    grid_size: usize,
) -> Result<SpectrumEstimate> {
    let min_grid = 4 * geom.m() * geom.n();
    if grid_size < min_grid {
        return Err(DoaError::InvalidArgument(format!(
            "grid size {grid_size} below minimum {min_grid}"
        )));
    }
    if r_hat.dim() != geom.len() {
        return Err(DoaError::LengthMismatch {
            left: r_hat.dim(),
            right: geom.len(),
        });
    }
    let sub = decompose(r_hat, d)?;
    let en_h = sub.e_n.adjoint();
    let step = TAU / grid_size as f64;
    let grid: Vec<f64> = (0..grid_size).map(|g| -PI + g as f64 * step).collect();
    // Null spectrum ||E_n^H a(psi)||^2; the pseudo-spectrum is its reciprocal.
    let null: Vec<f64> = grid
        .iter()
        .map(|&psi| (&en_h * steering_vector(geom.positions(), psi)).norm_squared())
        .collect();
    let spectrum: Vec<f64> = null
        .iter()
        .map(|&q| 1.0 / q.max(f64::MIN_POSITIVE))
        .collect();

    let (lo, hi) = spectrum
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo <= 1e-9 * hi {
        return Err(DoaError::EstimationFailure("flat MUSIC spectrum".into()));
    }

    let g = grid_size;
    let maxima: Vec<usize> = (0..g)
        .filter(|&i| {
            let prev = spectrum[(i + g - 1) % g];
            let next = spectrum[(i + 1) % g];
            spectrum[i] > prev && spectrum[i] >= next
        })
        .sorted_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]).then(a.cmp(&b)))
        .collect();

    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    for idx in maxima {
        let far = chosen.iter().all(|&c| {
            let sep = idx.abs_diff(c);
            sep.min(g - sep) >= 2
        });
        if far {
            chosen.push(idx);
        }
        if chosen.len() == d {
            break;
        }
    }
    if chosen.len() < d {
        return Err(DoaError::EstimationFailure(format!(
            "found {} MUSIC peaks, need {d}",
            chosen.len()
        )));
    }

    let mut peaks: Vec<f64> = chosen
        .iter()
        .map(|&i| {
            let (qm, q0, qp) = (null[(i + g - 1) % g], null[i], null[(i + 1) % g]);
            let curvature = qm - 2.0 * q0 + qp;
            let offset = if curvature > 0.0 {
                (0.5 * (qm - qp) / curvature).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            wrap_half_open(grid[i] + offset * step)
        })
        .collect();
    peaks.sort_by(f64::total_cmp);
    Ok(SpectrumEstimate {
        grid,
        spectrum,
        peaks,
    })
}

/// Wrapped errors `estimate - truth` after matching estimates to true
/// sources with the minimum total squared circular error. The result is
/// indexed by true source.
pub fn matched_errors(estimates: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(DoaError::LengthMismatch {
            left: estimates.len(),
            right: truth.len(),
        });
    }
    let d = truth.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for perm in (0..d).permutations(d) {
        let errs: Vec<f64> = (0..d)
            .map(|i| wrap_difference(estimates[perm[i]] - truth[i]))
            .collect();
        let total: f64 = errs.iter().map(|e| e * e).sum();
        if best.as_ref().is_none_or(|(t, _)| total < *t) {
            best = Some((total, errs));
        }
    }
    Ok(best.map(|(_, e)| e).unwrap_or_default())
}

/// Per-source mean squared circular error over trials.
pub fn mse(estimates: &[Vec<f64>], truth: &[f64]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; truth.len()];
    for trial in estimates {
        for (a, e) in acc.iter_mut().zip(matched_errors(trial, truth)?) {
            *a += e * e;
        }
    }
    let n = estimates.len().max(1) as f64;
    Ok(acc.into_iter().map(|s| s / n).collect())
}
