//! Python bindings for `coprime_doa`.
//!
//! Complex vectors and matrices cross the boundary as lists (of lists) of
//! Python `complex`; matrices are row-major, one row per sensor.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use coprime_doa::sim::{format_csv, Estimator};
use coprime_doa::{
    self as core, CoprimeGeometry, ExperimentConfig, PairingStrategy, SensorSet, SnapshotSet,
    SourceScenario, Subarray,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_subarray(which: &str) -> PyResult<Subarray> {
    match which {
        "first" => Ok(Subarray::First),
        "second" => Ok(Subarray::Second),
        other => Err(value_err(format!(
            "subarray must be 'first' or 'second', got '{other}'"
        ))),
    }
}

fn parse_sensors(sensors: &str) -> PyResult<SensorSet> {
    match sensors {
        "full" => Ok(SensorSet::Full),
        other => parse_subarray(other).map(SensorSet::Sub),
    }
}

fn rows_of(m: &DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<Complex64>]) -> PyResult<DMatrix<Complex64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(value_err("all rows must have the same length"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Coprime array geometry with coprime integers `m` and `n`.
#[pyclass(name = "CoprimeGeometry", frozen)]
struct PyCoprimeGeometry {
    inner: CoprimeGeometry,
}

#[pymethods]
impl PyCoprimeGeometry {
    #[new]
    fn new(m: usize, n: usize) -> PyResult<Self> {
        CoprimeGeometry::new(m, n)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Sensor positions in half wavelengths.
    #[getter]
    fn positions(&self) -> Vec<i64> {
        self.inner.positions().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Row indices of a subarray: `"first"` (step m) or `"second"` (step n).
    fn subarray_indices(&self, which: &str) -> PyResult<Vec<usize>> {
        Ok(self.inner.subarray_indices(parse_subarray(which)?).to_vec())
    }

    fn spacing(&self, which: &str) -> PyResult<usize> {
        Ok(self.inner.spacing(parse_subarray(which)?))
    }

    #[pyo3(signature = (psi, sensors = "full"))]
    fn steering_vector(&self, psi: f64, sensors: &str) -> PyResult<Vec<Complex64>> {
        Ok(self
            .inner
            .steering_vector(parse_sensors(sensors)?, psi)
            .iter()
            .copied()
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "CoprimeGeometry(m={}, n={})",
            self.inner.m(),
            self.inner.n()
        )
    }
}

/// Steering vector `exp(j p psi)` for arbitrary integer positions.
#[pyfunction]
fn steering_vector(positions: Vec<i64>, psi: f64) -> Vec<Complex64> {
    core::steering_vector(&positions, psi)
        .iter()
        .copied()
        .collect()
}

/// Simulated snapshots as a list of sensor rows.
#[pyfunction]
#[pyo3(signature = (geometry, doas, powers, noise_power, snapshots, seed = 0))]
fn synthesize_snapshots(
    geometry: &PyCoprimeGeometry,
    doas: Vec<f64>,
    powers: Vec<f64>,
    noise_power: f64,
    snapshots: usize,
    seed: u64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let sc = SourceScenario::new(doas, powers, noise_power).map_err(value_err)?;
    let set =
        core::synthesize_snapshots(&geometry.inner, &sc, snapshots, seed).map_err(value_err)?;
    Ok(rows_of(set.data()))
}

#[pyfunction]
fn fold_to_fundamental(phi: f64, spacing: usize) -> PyResult<f64> {
    if spacing == 0 {
        return Err(value_err("spacing must be positive"));
    }
    Ok(core::fold_to_fundamental(phi, spacing))
}

/// `(rep_n, rep_m)`: `psi` reduced modulo `2pi/n` and modulo `2pi/m`.
#[pyfunction]
fn residues(psi: f64, m: usize, n: usize) -> (f64, f64) {
    core::residues(psi, m, n)
}

/// Folded MODE estimates from one subarray of full-array snapshots.
#[pyfunction]
fn estimate_subarray(
    geometry: &PyCoprimeGeometry,
    snapshots: Vec<Vec<Complex64>>,
    which: &str,
    num_sources: usize,
) -> PyResult<Vec<f64>> {
    let set = SnapshotSet::new(matrix_from_rows(&snapshots)?).map_err(value_err)?;
    let est = core::estimate_subarray(&set, &geometry.inner, parse_subarray(which)?, num_sources)
        .map_err(value_err)?;
    Ok(est.reps)
}

/// Returns `(psi, cost, (k, l))`.
#[pyfunction]
fn project_single(
    rep_n: f64,
    rep_m: f64,
    m: usize,
    n: usize,
) -> PyResult<(f64, f64, (usize, usize))> {
    let p = core::project_single(rep_n, rep_m, m, n).map_err(value_err)?;
    Ok((p.psi, p.cost, p.lifts))
}

/// Pairs per-subarray estimates; returns a dict with `assignment`, `doas`,
/// `costs`, `total_cost` and `strategy`.
#[pyfunction]
#[pyo3(signature = (reps_n, reps_m, m, n, strategy = "auto"))]
fn pair_and_project<'py>(
    py: Python<'py>,
    reps_n: Vec<f64>,
    reps_m: Vec<f64>,
    m: usize,
    n: usize,
    strategy: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let strategy = match strategy {
        "auto" => PairingStrategy::Auto,
        "exhaustive" => PairingStrategy::Exhaustive,
        "greedy" => PairingStrategy::Greedy,
        other => return Err(value_err(format!("unknown pairing strategy '{other}'"))),
    };
    let res = core::pair_and_project(&reps_n, &reps_m, m, n, strategy).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("assignment", res.assignment)?;
    out.set_item("doas", res.doas)?;
    out.set_item("costs", res.costs)?;
    out.set_item("total_cost", res.total_cost)?;
    let used = match res.strategy {
        PairingStrategy::Greedy => "greedy",
        _ => "exhaustive",
    };
    out.set_item("strategy", used)?;
    Ok(out)
}

/// Segment lookup table as `(psi_lo, psi_hi, k, l)` tuples.
#[pyfunction]
fn segment_table(m: usize, n: usize) -> PyResult<Vec<(f64, f64, usize, usize)>> {
    let map = core::SegmentMap::new(m, n).map_err(value_err)?;
    Ok(map
        .segments()
        .iter()
        .map(|s| (s.psi_lo, s.psi_hi, s.k, s.l))
        .collect())
}

/// Per-source stochastic Cramér-Rao bound.
#[pyfunction]
fn stochastic_crb(
    geometry: &PyCoprimeGeometry,
    doas: Vec<f64>,
    powers: Vec<f64>,
    noise_power: f64,
    snapshots: usize,
) -> PyResult<Vec<f64>> {
    let sc = SourceScenario::new(doas, powers, noise_power).map_err(value_err)?;
    Ok(core::stochastic_crb(&geometry.inner, &sc, snapshots)
        .map_err(value_err)?
        .bounds)
}

/// Runs a Monte Carlo sweep and returns its CSV text.
///
/// Sweeps SNR unless `k_sweep` is given, in which case `snr_db` must hold a
/// single value.
#[pyfunction]
#[pyo3(signature = (
    m = 5, n = 7, doas = None, snapshots = 100, snr_db = None, k_sweep = None,
    trials = 200, seed = 1, estimator = "coprime-mode", grid_size = 8192,
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    m: usize,
    n: usize,
    doas: Option<Vec<f64>>,
    snapshots: usize,
    snr_db: Option<Vec<f64>>,
    k_sweep: Option<Vec<usize>>,
    trials: usize,
    seed: u64,
    estimator: &str,
    grid_size: usize,
) -> PyResult<String> {
    let defaults = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        m,
        n,
        doas: doas.unwrap_or(defaults.doas),
        snapshots,
        snr_db: snr_db.unwrap_or(defaults.snr_db),
        k_sweep,
        trials,
        seed,
        estimator: estimator.parse::<Estimator>().map_err(value_err)?,
        grid_size,
        out: None,
        segments_out: None,
    };
    let result = py.detach(|| core::run_sweep(&cfg)).map_err(value_err)?;
    Ok(format_csv(&result))
}

#[pymodule]
#[pyo3(name = "coprime_doa")]
pub fn coprime_doa_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoprimeGeometry>()?;
    m.add_function(wrap_pyfunction!(steering_vector, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_snapshots, m)?)?;
    m.add_function(wrap_pyfunction!(fold_to_fundamental, m)?)?;
    m.add_function(wrap_pyfunction!(residues, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_subarray, m)?)?;
    m.add_function(wrap_pyfunction!(project_single, m)?)?;
    m.add_function(wrap_pyfunction!(pair_and_project, m)?)?;
    m.add_function(wrap_pyfunction!(segment_table, m)?)?;
    m.add_function(wrap_pyfunction!(stochastic_crb, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
