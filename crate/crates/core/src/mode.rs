//! MODE (Method of Direction Estimation) for a uniform linear (sub)array,
//! plus folding of aliased subarray estimates into the fundamental interval.
//!
//! The polynomial `b(z) = b0 z^D + b1 z^(D-1) + ... + bD` annihilates the
//! steering vectors of a unit-spaced ULA through the banded Toeplitz matrix
//! `B^H` whose rows are `[bD ... b0]` shifted by one column per row. The fit
//! minimizes `tr{Pi_B E_s W E_s^H}` with `W = (Lambda_s - sigma^2 I)^2 Lambda_s^-1`
//! over conjugate-symmetric, unit-norm `b`:
//!
//! 1. minimize `||B^H V||_F^2` with `V = E_s W^(1/2)`, a quadratic form in `b`;
//! 2. re-minimize with `(B^H B)^-1` frozen at the previous iterate.
//!
//! Each step is the smallest eigenvector of a real symmetric matrix obtained
//! by substituting the conjugate symmetry into the quadratic form.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::angle::wrap_half_open;
use crate::array_model::{sample_covariance, CMatrix, CoprimeGeometry, SnapshotSet, Subarray};
use crate::error::{DoaError, Result};
use crate::subspace::{decompose, SubspaceDecomposition};

/// Iterations used by [`estimate_subarray`]: one unweighted, one reweighted.
pub const DEFAULT_ITERATIONS: usize = 2;

const COLLAPSE_TOL: f64 = 1e-12;
const DEGREE_TOL: f64 = 1e-12;

/// Coefficients `b0..bD` of the MODE polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    b: Vec<Complex64>,
}

impl ModeCoefficients {
    /// Wraps raw coefficients (highest power first) without normalizing.
    pub fn from_coefficients(b: Vec<Complex64>) -> Result<Self> {
        if b.len() < 2 {
            return Err(DoaError::InvalidArgument(
                "polynomial needs at least two coefficients".into(),
            ));
        }
        Ok(Self { b })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.b
    }

    pub fn degree(&self) -> usize {
        self.b.len() - 1
    }

    /// Horner evaluation of `b(z)`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.b
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Whether `b_k == conj(b_{D-k})` for all `k`, to within `tol`.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let d = self.degree();
        (0..=d).all(|k| (self.b[k] - self.b[d - k].conj()).norm() <= tol)
    }
}

/// Complex basis `T` with `b = T theta` spanning the conjugate-symmetric
/// coefficient vectors for real `theta`; columns are orthonormal.
fn symmetric_basis(degree: usize) -> CMatrix {
    let len = degree + 1;
    let mut t = CMatrix::zeros(len, len);
    let mut col = 0;
    for k in 0..len / 2 {
        let mirror = degree - k;
        t[(k, col)] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        t[(mirror, col)] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        t[(k, col + 1)] = Complex64::new(0.0, FRAC_1_SQRT_2);
        t[(mirror, col + 1)] = Complex64::new(0.0, -FRAC_1_SQRT_2);
        col += 2;
    }
    if degree.is_multiple_of(2) {
        t[(degree / 2, col)] = Complex64::new(1.0, 0.0);
    }
    t
}

/// The `(len - D) x len` banded Toeplitz matrix `B^H`.
pub fn annihilator(b: &[Complex64], len: usize) -> CMatrix {
    let d = b.len() - 1;
    let mut bh = CMatrix::zeros(len - d, len);
    for i in 0..len - d {
        for t in 0..=d {
            bh[(i, i + t)] = b[d - t];
        }
    }
    bh
}

/// `V = E_s W^(1/2)`.
fn weighted_signal_subspace(sub: &SubspaceDecomposition) -> Result<CMatrix> {
    let total: f64 = sub.lambda_s.iter().chain(&sub.lambda_n).sum();
    let max_gap = sub
        .lambda_s
        .iter()
        .map(|&l| l - sub.sigma2_hat)
        .fold(f64::MIN, f64::max);
    if !(total > 0.0) || max_gap <= COLLAPSE_TOL * total {
        return Err(DoaError::SubspaceCollapse);
    }
    let mut v = sub.e_s.clone();
    for (mut col, &lambda) in v.column_iter_mut().zip(&sub.lambda_s) {
        let gap = lambda - sub.sigma2_hat;
        let w = if lambda > 0.0 {
            gap * gap / lambda
        } else {
            0.0
        };
        col.scale_mut(w.sqrt());
    }
    Ok(v)
}

/// `tr{Pi_B E_s W E_s^H}` evaluated at coefficients `b`.
pub fn mode_objective(sub: &SubspaceDecomposition, b: &[Complex64]) -> Result<f64> {
    let v = weighted_signal_subspace(sub)?;
    let bh = annihilator(b, sub.dim());
    let gram_inv = (&bh * bh.adjoint())
        .try_inverse()
        .ok_or_else(|| DoaError::EstimationFailure("B^H B is singular".into()))?;
    let bv = &bh * v;
    Ok((gram_inv * &bv * bv.adjoint()).trace().re)
}

/// Fits the MODE polynomial and returns every iterate, first to last.
pub fn mode_fit_iterates(
    sub: &SubspaceDecomposition,
    iterations: usize,
) -> Result<Vec<ModeCoefficients>> {
    let d = sub.num_sources();
    let len = sub.dim();
    if len <= d {
        return Err(DoaError::SourceCount { d, len });
    }
    if iterations == 0 {
        return Err(DoaError::InvalidArgument(
            "MODE needs at least one iteration".into(),
        ));
    }
    let v = weighted_signal_subspace(sub)?;
    // vec(B^H v_c) = G_c b with G_c[i, k] = v[i + D - k, c].
    let designs = design_matrices(&v, d);
    let basis = symmetric_basis(d);

    let mut iterates: Vec<ModeCoefficients> = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let weight = match iterates.last() {
            None => None,
            Some(prev) => {
                let bh = annihilator(prev.coefficients(), len);
                let inv = (&bh * bh.adjoint())
                    .try_inverse()
                    .ok_or_else(|| DoaError::EstimationFailure("B^H B is singular".into()))?;
                Some(inv)
            }
        };
        let mut h = CMatrix::zeros(d + 1, d + 1);
        for g in &designs {
            h += match &weight {
                None => g.adjoint() * g,
                Some(q) => g.adjoint() * q * g,
            };
        }
        let eig = SymmetricEigen::new(real_form(&basis, &h));
        let imin = eig.eigenvalues.imin();
        let theta = eig
            .eigenvectors
            .column(imin)
            .map(|x| Complex64::new(x, 0.0));
        let b = &basis * theta;
        iterates.push(normalize(b.iter().copied().collect()));
    }
    Ok(iterates)
}

/// MODE coefficient fit for a subarray treated as a unit-spaced ULA:
/// `iterations` reweighted steps, then a descent-only polish onto a
/// stationary point of the exact criterion.
pub fn mode_fit(sub: &SubspaceDecomposition, iterations: usize) -> Result<ModeCoefficients> {
    let mut iterates = mode_fit_iterates(sub, iterations)?;
    let start = iterates.pop().expect("at least one iterate");
    refine_to_stationarity(sub, start)
}

/// Wirtinger gradient of the exact criterion at `b`, split as `X(b) b - Y(b) b`:
/// `X = sum_c G_c^H Q G_c` and `Y_kj = sum_c (J_j^H u_c)^H (J_k^H u_c)` with
/// `Q = (B^H B)^-1`, `u_c = Q B^H v_c` and `J_k` the shift pattern of `b_k`
/// in `B^H`. Returns `(X - Y, objective)`.
fn criterion_gradient_form(
    v: &CMatrix,
    designs: &[CMatrix],
    b: &[Complex64],
) -> Result<(CMatrix, f64)> {
    let d = b.len() - 1;
    let len = v.nrows();
    let bh = annihilator(b, len);
    let q = (&bh * bh.adjoint())
        .try_inverse()
        .ok_or_else(|| DoaError::EstimationFailure("B^H B is singular".into()))?;
    let mut form = CMatrix::zeros(d + 1, d + 1);
    let mut objective = 0.0;
    for (vc, g) in v.column_iter().zip(designs) {
        let resid = &bh * vc;
        let u = &q * &resid;
        objective += resid.dotc(&u).re;
        form += g.adjoint() * &q * g;
        // Column k holds J_k^H u: entry p = u[p - D + k].
        let shifted = CMatrix::from_fn(len, d + 1, |p, k| {
            let idx = p as isize - d as isize + k as isize;
            if idx >= 0 && (idx as usize) < len - d {
                u[idx as usize]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        form -= (shifted.adjoint() * &shifted).transpose();
    }
    Ok((form, objective))
}

/// Modified-Prony style polish: repeatedly take the eigenvector of the
/// real-parameterized gradient form whose eigenvalue is closest to zero,
/// keeping a step only if it lowers the criterion.
fn refine_to_stationarity(
    sub: &SubspaceDecomposition,
    start: ModeCoefficients,
) -> Result<ModeCoefficients> {
    const MAX_STEPS: usize = 25;
    let d = sub.num_sources();
    let v = weighted_signal_subspace(sub)?;
    let designs = design_matrices(&v, d);
    let basis = symmetric_basis(d);

    let mut best = start;
    let (mut form, mut best_obj) = criterion_gradient_form(&v, &designs, best.coefficients())?;
    for _ in 0..MAX_STEPS {
        let real = real_form(&basis, &form);
        let eig = SymmetricEigen::new(real);
        let pick = (0..=d)
            .min_by(|&a, &b| {
                eig.eigenvalues[a]
                    .abs()
                    .total_cmp(&eig.eigenvalues[b].abs())
            })
            .expect("non-empty spectrum");
        let theta = eig
            .eigenvectors
            .column(pick)
            .map(|x| Complex64::new(x, 0.0));
        let candidate = normalize((&basis * theta).iter().copied().collect());
        let (next_form, obj) = criterion_gradient_form(&v, &designs, candidate.coefficients())?;
        if !(obj < best_obj) {
            break;
        }
        let step: f64 = candidate
            .coefficients()
            .iter()
            .zip(best.coefficients())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        best = candidate;
        best_obj = obj;
        form = next_form;
        if step < 1e-13 {
            break;
        }
    }
    Ok(best)
}

fn design_matrices(v: &CMatrix, d: usize) -> Vec<CMatrix> {
    let rows = v.nrows() - d;
    v.column_iter()
        .map(|vc| CMatrix::from_fn(rows, d + 1, |i, k| vc[i + d - k]))
        .collect()
}

/// `Re(T^H H T)`, symmetrized.
fn real_form(basis: &CMatrix, h: &CMatrix) -> DMatrix<f64> {
    let reduced = basis.adjoint() * h * basis;
    let n = reduced.nrows();
    DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (reduced[(i, j)].re + reduced[(j, i)].re))
}

/// Unit norm; sign chosen so the leading coefficient points into the right
/// half-plane (upper half when purely imaginary).
fn normalize(mut b: Vec<Complex64>) -> ModeCoefficients {
    let norm = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let lead = b[0];
    let flip = if lead.re.abs() > 1e-14 * norm {
        lead.re < 0.0
    } else {
        lead.im < 0.0
    };
    let scale = if flip { -1.0 / norm } else { 1.0 / norm };
    for c in &mut b {
        *c *= scale;
    }
    ModeCoefficients { b }
}

/// Roots of `b0 z^D + ... + bD` as eigenvalues of the monic companion matrix.
pub fn polynomial_roots(b: &[Complex64]) -> Result<Vec<Complex64>> {
    let degree = b.len().saturating_sub(1);
    let norm = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let lead = b.first().map(|c| c.norm()).unwrap_or(0.0);
    if degree == 0 || lead < DEGREE_TOL * norm || lead == 0.0 {
        return Err(DoaError::DegreeDeficient { lead, norm });
    }
    if degree == 1 {
        return Ok(vec![-b[1] / b[0]]);
    }
    let mut companion = CMatrix::zeros(degree, degree);
    for j in 0..degree {
        companion[(0, j)] = -b[j + 1] / b[0];
    }
    for i in 1..degree {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    let schur = Schur::try_new(companion, f64::EPSILON, 1000 * degree)
        .ok_or(DoaError::RootFinding(degree))?;
    let eig = schur.eigenvalues().ok_or(DoaError::RootFinding(degree))?;
    Ok(eig.iter().copied().collect())
}

/// Angles `arg(z_i)` of the polynomial roots in `[-pi, pi)`, ascending.
/// Radial distance from the unit circle is ignored.
pub fn roots_to_angles(coeffs: &ModeCoefficients) -> Result<Vec<f64>> {
    let mut angles: Vec<f64> = polynomial_roots(coeffs.coefficients())?
        .iter()
        .map(|z| wrap_half_open(z.arg()))
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Maps a unit-spaced estimate `phi` of a subarray with physical step
/// `spacing` to the unique `psi` in `[-pi, -pi + 2pi/spacing)` with
/// `spacing * psi == phi (mod 2pi)`.
pub fn fold_to_fundamental(phi: f64, spacing: usize) -> f64 {
    assert!(spacing >= 1, "spacing must be positive");
    let s = spacing as f64;
    let period = TAU / s;
    let mut r = (phi / s + PI).rem_euclid(period);
    if r >= period {
        r = 0.0;
    }
    -PI + r
}

/// Subarray DOA estimates folded into the fundamental interval.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedEstimate {
    pub spacing: usize,
    /// Ascending, each in `[-pi, -pi + 2pi/spacing)`.
    pub reps: Vec<f64>,
}

impl FoldedEstimate {
    pub fn period(&self) -> f64 {
        TAU / self.spacing as f64
    }
}

/// Rows of one subarray -> covariance -> subspace -> MODE -> fold.
pub fn estimate_subarray(
    snaps: &SnapshotSet,
    geom: &CoprimeGeometry,
    which: Subarray,
    d: usize,
) -> Result<FoldedEstimate> {
    estimate_subarray_with(snaps, geom, which, d, DEFAULT_ITERATIONS)
}

pub fn estimate_subarray_with(
    snaps: &SnapshotSet,
    geom: &CoprimeGeometry,
    which: Subarray,
    d: usize,
    iterations: usize,
) -> Result<FoldedEstimate> {
    if snaps.num_sensors() != geom.len() {
        return Err(DoaError::LengthMismatch {
            left: snaps.num_sensors(),
            right: geom.len(),
        });
    }
    let rows = snaps.select_rows(geom.subarray_indices(which));
    let sub = decompose(&sample_covariance(&rows), d)?;
    let coeffs = mode_fit(&sub, iterations)?;
    let spacing = geom.spacing(which);
    let mut reps: Vec<f64> = roots_to_angles(&coeffs)?
        .into_iter()
        .map(|phi| fold_to_fundamental(phi, spacing))
        .collect();
    reps.sort_by(f64::total_cmp);
    Ok(FoldedEstimate { spacing, reps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{steering_vector, CVector, CovarianceEstimate};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Exact covariance of a unit-spaced ULA with unit-power sources.
    fn ula_decomposition(len: usize, phis: &[f64], noise: f64) -> SubspaceDecomposition {
        let positions: Vec<i64> = (0..len as i64).collect();
        let mut r = CMatrix::identity(len, len) * c(noise, 0.0);
        for &phi in phis {
            let a = steering_vector(&positions, phi);
            r += &a * a.adjoint();
        }
        decompose(&CovarianceEstimate::from_matrix(r).unwrap(), phis.len()).unwrap()
    }

    fn assert_proportional(b: &[Complex64], expected: &[Complex64]) {
        let ev = CVector::from_column_slice(expected);
        let bv = CVector::from_column_slice(b);
        let overlap = (ev.adjoint() * &bv)[(0, 0)].norm() / (ev.norm() * bv.norm());
        assert!((overlap - 1.0).abs() < 1e-10, "overlap {overlap}");
    }

    #[test]
    fn single_source_noiseless_fit() {
        let phi = 0.2 * PI;
        let sub = ula_decomposition(4, &[phi], 0.0);
        let b = mode_fit(&sub, 2).unwrap();
        assert_proportional(
            b.coefficients(),
            &[c(1.0, 0.0), -Complex64::from_polar(1.0, phi)],
        );
        assert!(b.is_conjugate_symmetric(1e-15));
        let norm: f64 = b.coefficients().iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_source_noiseless_fit() {
        let sub = ula_decomposition(6, &[0.3 * PI, -0.3 * PI], 0.0);
        let b = mode_fit(&sub, 2).unwrap();
        let expected = [c(1.0, 0.0), c(-2.0 * (0.3 * PI).cos(), 0.0), c(1.0, 0.0)];
        assert_proportional(b.coefficients(), &expected);
        let angles = roots_to_angles(&b).unwrap();
        assert!((angles[0] + 0.3 * PI).abs() < 1e-7);
        assert!((angles[1] - 0.3 * PI).abs() < 1e-7);
    }

    #[test]
    fn symmetric_basis_is_orthonormal_and_symmetric() {
        for d in 1..6 {
            let t = symmetric_basis(d);
            assert!((t.adjoint() * &t - CMatrix::identity(d + 1, d + 1)).norm() < 1e-14);
            for col in t.column_iter() {
                let b = ModeCoefficients::from_coefficients(col.iter().copied().collect()).unwrap();
                assert!(b.is_conjugate_symmetric(1e-15));
            }
        }
    }

    #[test]
    fn roots_of_simple_polynomials() {
        let b = ModeCoefficients::from_coefficients(vec![
            c(FRAC_1_SQRT_2, 0.0),
            c(-FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        assert_eq!(roots_to_angles(&b).unwrap(), vec![0.0]);

        let b = ModeCoefficients::from_coefficients(vec![
            c(1.0, 0.0),
            c(-2.0 * (0.3 * PI).cos(), 0.0),
            c(1.0, 0.0),
        ])
        .unwrap();
        let angles = roots_to_angles(&b).unwrap();
        assert!((angles[0] + 0.3 * PI).abs() < 1e-12);
        assert!((angles[1] - 0.3 * PI).abs() < 1e-12);
    }

    #[test]
    fn degree_deficiency_is_rejected() {
        let b = ModeCoefficients::from_coefficients(vec![c(1e-14, 0.0), c(1.0, 0.0), c(0.5, 0.0)])
            .unwrap();
        assert!(matches!(
            roots_to_angles(&b),
            Err(DoaError::DegreeDeficient { .. })
        ));
    }

    #[test]
    fn angle_pi_maps_to_minus_pi() {
        // Root at z = -1.
        let b = ModeCoefficients::from_coefficients(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(roots_to_angles(&b).unwrap(), vec![-PI]);
    }

    #[test]
    fn fold_examples() {
        let r = fold_to_fundamental(0.7 * PI, 7);
        let expected = 0.1 * PI - 3.0 * TAU / 7.0;
        assert!((r - expected).abs() < 1e-12);
        assert!((r + 0.757_142_857_142_857 * PI).abs() < 1e-12);
        assert!((-PI..-PI + TAU / 7.0).contains(&r));

        assert_eq!(fold_to_fundamental(0.0, 2), -PI);
        assert!((fold_to_fundamental(0.5 * PI, 5) + 0.7 * PI).abs() < 1e-12);
    }

    #[test]
    fn collapse_is_rejected() {
        let sub = ula_decomposition(4, &[0.1], 1.0);
        let collapsed = SubspaceDecomposition {
            lambda_s: vec![sub.sigma2_hat],
            ..sub
        };
        assert_eq!(
            mode_fit(&collapsed, 2).unwrap_err(),
            DoaError::SubspaceCollapse
        );
    }

    #[test]
    fn gradient_form_matches_finite_differences() {
        let sub = ula_decomposition(7, &[0.4, -1.3], 0.3);
        let v = weighted_signal_subspace(&sub).unwrap();
        let designs = design_matrices(&v, 2);
        let basis = symmetric_basis(2);
        let theta = [0.3, -0.7, 0.5];
        let coeffs = |th: &[f64]| -> Vec<Complex64> {
            let t = nalgebra::DVector::from_iterator(3, th.iter().map(|&x| c(x, 0.0)));
            (&basis * t).iter().copied().collect()
        };
        let (form, obj) = criterion_gradient_form(&v, &designs, &coeffs(&theta)).unwrap();
        assert!((obj - mode_objective(&sub, &coeffs(&theta)).unwrap()).abs() < 1e-12);
        let b = CVector::from_vec(coeffs(&theta));
        let grad = (basis.adjoint() * form * b).map(|z| 2.0 * z.re);
        let h = 1e-6;
        for i in 0..3 {
            let mut up = theta;
            let mut dn = theta;
            up[i] += h;
            dn[i] -= h;
            let fd = (mode_objective(&sub, &coeffs(&up)).unwrap()
                - mode_objective(&sub, &coeffs(&dn)).unwrap())
                / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "{i}: {fd} vs {}",
                grad[i]
            );
        }
    }

    #[test]
    fn polish_never_increases_the_criterion() {
        let sub = ula_decomposition(5, &[0.9], 2.0);
        let start = mode_fit_iterates(&sub, 2).unwrap().pop().unwrap();
        let polished = mode_fit(&sub, 2).unwrap();
        let f0 = mode_objective(&sub, start.coefficients()).unwrap();
        let f1 = mode_objective(&sub, polished.coefficients()).unwrap();
        assert!(f1 <= f0);
    }

    #[test]
    fn zero_iterations_rejected() {
        let sub = ula_decomposition(4, &[0.1], 0.1);
        assert!(mode_fit(&sub, 0).is_err());
    }
}
