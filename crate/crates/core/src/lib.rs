//! Search-free direction-of-arrival estimation for coprime arrays.
//!
//! Each uniform subarray is processed with MODE, which yields estimates that
//! are ambiguous modulo the subarray's aliasing period. The two folded
//! estimates define a point on the residue torus; projecting it onto the
//! oblique segments traced by the true angle recovers an unambiguous DOA.
//!
//! All angles are electrical angles `psi` in `[-pi, pi)`; sensor positions
//! are integer multiples of half a wavelength.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod array_model;
pub mod disambiguation;
pub mod error;
pub mod evaluation;
pub mod mode;
pub mod sim;
pub mod subspace;

pub use array_model::{
    model_covariance, sample_covariance, steering_vector, synthesize_snapshots, CoprimeGeometry,
    CovarianceEstimate, SensorSet, SnapshotSet, SourceScenario, Subarray,
};
pub use disambiguation::{
    pair_and_project, project_single, residues, residues_to_psi_crt, PairingResult,
    PairingStrategy, ProjectionResult, SegmentMap,
};
pub use error::{DoaError, Result};
pub use evaluation::{grid_music, mse, stochastic_crb, CrbResult, SpectrumEstimate};
pub use mode::{
    estimate_subarray, fold_to_fundamental, mode_fit, roots_to_angles, FoldedEstimate,
    ModeCoefficients,
};
pub use sim::{run_sweep, run_trial, ExperimentConfig, SweepResult};
pub use subspace::{decompose, SubspaceDecomposition};
