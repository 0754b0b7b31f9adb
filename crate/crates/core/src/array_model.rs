//! Coprime array geometry, steering vectors, snapshot synthesis and the
//! sample covariance.
//!
//! Sensor positions are integer multiples of half a wavelength, so every
//! phase is `p * psi` with `psi` the electrical angle.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{DoaError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Greatest common divisor.
pub(crate) fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn check_coprime_pair(m: usize, n: usize) -> Result<()> {
    let reject = |reason: &str| {
        Err(DoaError::InvalidGeometry {
            m,
            n,
            reason: reason.to_string(),
        })
    };
    if m < 2 || n < 2 {
        return reject("both spacing multipliers must be at least 2");
    }
    if m == n {
        return reject("spacing multipliers must differ");
    }
    let g = gcd(m, n);
    if g != 1 {
        return reject(&format!("m and n are not coprime (gcd = {g})"));
    }
    Ok(())
}

/// One of the two uniform subarrays sharing the reference sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subarray {
    /// `N` sensors at positions `0, M, ..., (N-1)M`.
    First,
    /// `M` sensors at positions `0, N, ..., (M-1)N`.
    Second,
}

/// Sensor selection for steering vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorSet {
    Full,
    Sub(Subarray),
}

/// Two uniform linear subarrays with coprime spacings `M` and `N` (in units of
/// half a wavelength) that share the sensor at the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoprimeGeometry {
    m: usize,
    n: usize,
    positions: Vec<i64>,
    subarray1_idx: Vec<usize>,
    subarray2_idx: Vec<usize>,
}

impl CoprimeGeometry {
    /// Builds the array with positions `[0, M, ..., (N-1)M, N, 2N, ..., (M-1)N]`.
    pub fn new(m: usize, n: usize) -> Result<Self> {
        check_coprime_pair(m, n)?;
        let mut positions: Vec<i64> = (0..n).map(|i| (i * m) as i64).collect();
        positions.extend((1..m).map(|i| (i * n) as i64));
        let subarray1_idx = (0..n).collect();
        let subarray2_idx = std::iter::once(0).chain(n..n + m - 1).collect();
        Ok(Self {
            m,
            n,
            positions,
            subarray1_idx,
            subarray2_idx,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total sensor count `L = M + N - 1`.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn subarray_indices(&self, which: Subarray) -> &[usize] {
        match which {
            Subarray::First => &self.subarray1_idx,
            Subarray::Second => &self.subarray2_idx,
        }
    }

    /// Inter-element step of a subarray, in half wavelengths.
    pub fn spacing(&self, which: Subarray) -> usize {
        match which {
            Subarray::First => self.m,
            Subarray::Second => self.n,
        }
    }

    /// Position multipliers of the selected sensors.
    pub fn sensor_positions(&self, set: SensorSet) -> Vec<i64> {
        match set {
            SensorSet::Full => self.positions.clone(),
            SensorSet::Sub(which) => self
                .subarray_indices(which)
                .iter()
                .map(|&i| self.positions[i])
                .collect(),
        }
    }

    pub fn steering_vector(&self, set: SensorSet, psi: f64) -> CVector {
        steering_vector(&self.sensor_positions(set), psi)
    }

    /// `L x D` steering matrix of the full array.
    pub fn steering_matrix(&self, doas: &[f64]) -> CMatrix {
        steering_matrix(&self.positions, doas)
    }
}

/// `exp(j p_l psi)` for every position.
pub fn steering_vector(positions: &[i64], psi: f64) -> CVector {
    CVector::from_iterator(
        positions.len(),
        positions
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p as f64 * psi)),
    )
}

pub fn steering_matrix(positions: &[i64], doas: &[f64]) -> CMatrix {
    let cols: Vec<CVector> = doas
        .iter()
        .map(|&psi| steering_vector(positions, psi))
        .collect();
    CMatrix::from_columns(&cols)
}

/// Uncorrelated narrowband sources in white noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScenario {
    doas: Vec<f64>,
    powers: Vec<f64>,
    noise_power: f64,
}

impl SourceScenario {
    pub fn new(doas: Vec<f64>, powers: Vec<f64>, noise_power: f64) -> Result<Self> {
        if doas.is_empty() {
            return Err(DoaError::InvalidScenario(
                "at least one source is required".into(),
            ));
        }
        if doas.len() != powers.len() {
            return Err(DoaError::LengthMismatch {
                left: doas.len(),
                right: powers.len(),
            });
        }
        if let Some(bad) = doas.iter().find(|&&d| !d.is_finite()) {
            return Err(DoaError::InvalidScenario(format!("non-finite DOA {bad}")));
        }
        for (i, a) in doas.iter().enumerate() {
            if doas[i + 1..].contains(a) {
                return Err(DoaError::InvalidScenario(format!("duplicate DOA {a}")));
            }
        }
        if let Some(bad) = powers.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
            return Err(DoaError::InvalidScenario(format!(
                "source powers must be positive, got {bad}"
            )));
        }
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return Err(DoaError::InvalidScenario(format!(
                "noise power must be non-negative, got {noise_power}"
            )));
        }
        Ok(Self {
            doas,
            powers,
            noise_power,
        })
    }

    /// Unit-power sources with `sigma^2 = 10^(-snr_db / 10)`.
    pub fn with_snr_db(doas: Vec<f64>, snr_db: f64) -> Result<Self> {
        let powers = vec![1.0; doas.len()];
        Self::new(doas, powers, 10f64.powf(-snr_db / 10.0))
    }

    pub fn doas(&self) -> &[f64] {
        &self.doas
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn num_sources(&self) -> usize {
        self.doas.len()
    }
}

/// `L x K` observation matrix; column `k` is the snapshot `y(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    data: CMatrix,
}

impl SnapshotSet {
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(DoaError::InvalidArgument(
                "at least one snapshot is required".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn num_sensors(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.data.ncols()
    }

    /// Snapshot rows of the given sensors, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SnapshotSet {
        SnapshotSet {
            data: self.data.select_rows(rows),
        }
    }

    /// One line per sensor, cells formatted as `re+imj`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.data.row_iter() {
            let cells: Vec<String> = row.iter().map(|z| format_complex(*z)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn format_complex(z: Complex64) -> String {
    let mut s = format!("{:.11e}", z.re);
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    let _ = write!(s, "{sign}{:.11e}j", z.im.abs());
    s
}

/// Draws `y(k) = A x(k) + w(k)` for `k` snapshots from a seeded generator.
pub fn synthesize_snapshots(
    geom: &CoprimeGeometry,
    scenario: &SourceScenario,
    k: usize,
    seed: u64,
) -> Result<SnapshotSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_snapshots_with(geom, scenario, k, &mut rng)
}

/// As [`synthesize_snapshots`], drawing from a caller-supplied generator.
pub fn synthesize_snapshots_with<R: Rng + ?Sized>(
    geom: &CoprimeGeometry,
    scenario: &SourceScenario,
    k: usize,
    rng: &mut R,
) -> Result<SnapshotSet> {
    if k == 0 {
        return Err(DoaError::InvalidArgument(
            "at least one snapshot is required".into(),
        ));
    }
    let a = geom.steering_matrix(scenario.doas());
    let l = geom.len();
    let d = scenario.num_sources();
    let source_scale: Vec<f64> = scenario.powers().iter().map(|p| (p / 2.0).sqrt()).collect();
    let noise_scale = (scenario.noise_power() / 2.0).sqrt();

    let mut data = CMatrix::zeros(l, k);
    let mut x = CVector::zeros(d);
    for col in 0..k {
        for (xi, scale) in x.iter_mut().zip(&source_scale) {
            *xi = complex_normal(rng, *scale);
        }
        let mut y = &a * &x;
        for yi in y.iter_mut() {
            *yi += complex_normal(rng, noise_scale);
        }
        data.set_column(col, &y);
    }
    Ok(SnapshotSet { data })
}

/// Circular complex Gaussian with per-component standard deviation `scale`.
fn complex_normal<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Hermitian `L x L` covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    r_hat: CMatrix,
}

impl CovarianceEstimate {
    /// Wraps an existing matrix; it must be square.
    pub fn from_matrix(r_hat: CMatrix) -> Result<Self> {
        if !r_hat.is_square() {
            return Err(DoaError::InvalidArgument(format!(
                "covariance must be square, got {}x{}",
                r_hat.nrows(),
                r_hat.ncols()
            )));
        }
        Ok(Self { r_hat })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.r_hat
    }

    pub fn dim(&self) -> usize {
        self.r_hat.nrows()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.r_hat
    }
}

/// `(1/K) sum_k y(k) y(k)^H`, symmetrized against rounding.
pub fn sample_covariance(snaps: &SnapshotSet) -> CovarianceEstimate {
    let y = snaps.data();
    let k = y.ncols() as f64;
    let r = (y * y.adjoint()).unscale(k);
    let r_hat = (&r + r.adjoint()).unscale(2.0);
    CovarianceEstimate { r_hat }
}

/// Model covariance `A P A^H + sigma^2 I` of the full array.
pub fn model_covariance(geom: &CoprimeGeometry, scenario: &SourceScenario) -> CovarianceEstimate {
    let a = geom.steering_matrix(scenario.doas());
    let p = CMatrix::from_diagonal(&CVector::from_iterator(
        scenario.num_sources(),
        scenario.powers().iter().map(|&p| Complex64::new(p, 0.0)),
    ));
    let mut r = &a * p * a.adjoint();
    for i in 0..r.nrows() {
        r[(i, i)] += Complex64::new(scenario.noise_power(), 0.0);
    }
    CovarianceEstimate { r_hat: r }
}
