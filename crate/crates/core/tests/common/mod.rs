//! Reference computations that deliberately avoid the library's code paths.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// Circular distance from `psi` to the nearest `rep + j * period`.
pub fn alias_distance(psi: f64, rep: f64, period: f64) -> f64 {
    let mut x = (psi - rep).rem_euclid(period);
    if x > 0.5 * period {
        x -= period;
    }
    x.abs()
}

pub fn oracle_cost(psi: f64, rep_n: f64, rep_m: f64, m: usize, n: usize) -> f64 {
    let dn = alias_distance(psi, rep_n, TAU / n as f64);
    let dm = alias_distance(psi, rep_m, TAU / m as f64);
    dn * dn + dm * dm
}

/// Brute-force minimizer of the torus cost over `points` grid angles in
/// `[-pi, pi)`. Returns `(psi, cost)`.
pub fn grid_minimizer(rep_n: f64, rep_m: f64, m: usize, n: usize, points: usize) -> (f64, f64) {
    // Round-to-nearest via the 1.5 * 2^52 trick keeps the loop branch-free.
    const MAGIC: f64 = 6_755_399_441_055_744.0;
    let step = TAU / points as f64;
    let (pn, pm) = (TAU / n as f64, TAU / m as f64);
    let (inv_n, inv_m) = (1.0 / pn, 1.0 / pm);
    let mut best = (f64::MAX, 0usize);
    for g in 0..points {
        let psi = -PI + g as f64 * step;
        let xn = psi - rep_n;
        let xm = psi - rep_m;
        let dn = xn - pn * ((xn * inv_n + MAGIC) - MAGIC);
        let dm = xm - pm * ((xm * inv_m + MAGIC) - MAGIC);
        let c = dn * dn + dm * dm;
        if c < best.0 {
            best = (c, g);
        }
    }
    (-PI + best.1 as f64 * step, best.0)
}

pub fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// `R = sum_d p_d a_d a_d^H + sigma^2 I` built element by element.
pub fn covariance_by_elements(
    positions: &[i64],
    doas: &[f64],
    powers: &[f64],
    sigma2: f64,
) -> CMat {
    let l = positions.len();
    CMat::from_fn(l, l, |i, j| {
        let mut v = Complex64::new(if i == j { sigma2 } else { 0.0 }, 0.0);
        for (psi, p) in doas.iter().zip(powers) {
            let phase = (positions[i] - positions[j]) as f64 * psi;
            v += Complex64::from_polar(*p, phase);
        }
        v
    })
}

/// Variance bound on `psi_1` from the Gaussian Fisher information
/// `K tr(R^-1 dR_i R^-1 dR_j)`, with the derivatives of `R` taken by central
/// differences over `(psi_1..psi_D, p_1..p_D, sigma^2)`.
pub fn numerical_fim_bounds(
    positions: &[i64],
    doas: &[f64],
    powers: &[f64],
    sigma2: f64,
    k: usize,
) -> Vec<f64> {
    let d = doas.len();
    let params: Vec<f64> = doas.iter().chain(powers).copied().chain([sigma2]).collect();
    let build = |theta: &[f64]| {
        covariance_by_elements(positions, &theta[..d], &theta[d..2 * d], theta[2 * d])
    };
    let r_inv = build(&params).try_inverse().unwrap();
    let h = 1e-6;
    let derivs: Vec<CMat> = (0..params.len())
        .map(|i| {
            let mut up = params.clone();
            let mut dn = params.clone();
            up[i] += h;
            dn[i] -= h;
            (build(&up) - build(&dn)) / Complex64::new(2.0 * h, 0.0)
        })
        .collect();
    let np = params.len();
    let fim = DMatrix::<f64>::from_fn(np, np, |i, j| {
        k as f64 * (&r_inv * &derivs[i] * &r_inv * &derivs[j]).trace().re
    });
    let inv = fim.try_inverse().unwrap();
    (0..d).map(|i| inv[(i, i)]).collect()
}

/// `tr{Pi_B E_s W E_s^H}` with `Pi_B` formed explicitly from `B`.
pub fn mode_objective_reference(e_s: &CMat, lambda_s: &[f64], sigma2: f64, b: &[Complex64]) -> f64 {
    let len = e_s.nrows();
    let d = b.len() - 1;
    // B^H row i holds b_D..b_0 starting at column i.
    let b_mat = CMat::from_fn(len, len - d, |row, col| {
        if row >= col && row - col <= d {
            b[d - (row - col)].conj()
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let gram = b_mat.adjoint() * &b_mat;
    let proj = &b_mat * gram.try_inverse().unwrap() * b_mat.adjoint();
    let w = CMat::from_fn(d, d, |i, j| {
        if i == j {
            let g = lambda_s[i] - sigma2;
            Complex64::new(g * g / lambda_s[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    (proj * e_s * w * e_s.adjoint()).trace().re
}

/// Random conjugate-symmetric unit-norm coefficients of degree `d`.
pub fn random_symmetric_coefficients<R: rand::Rng>(rng: &mut R, d: usize) -> Vec<Complex64> {
    let mut b = vec![Complex64::new(0.0, 0.0); d + 1];
    for k in 0..=d / 2 {
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = if 2 * k == d {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        };
        b[k] = Complex64::new(re, im);
        b[d - k] = Complex64::new(re, -im);
    }
    let norm = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    b.iter().map(|c| c / norm).collect()
}
