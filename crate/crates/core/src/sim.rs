//! Monte Carlo experiment runner: MSE against SNR or snapshot count, with
//! the stochastic CRB attached to every sweep point.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::angle::parse_angle;
use crate::array_model::{
    sample_covariance, synthesize_snapshots_with, CoprimeGeometry, SourceScenario, Subarray,
};
use crate::disambiguation::{pair_and_project, PairingStrategy, SegmentMap};
use crate::error::DoaError;
use crate::evaluation::{grid_music, matched_errors, stochastic_crb};
use crate::mode::estimate_subarray;

pub const CSV_HEADER: &str = "sweep_axis,sweep_value,source_index,mse,crb,gross_error_rate,trials";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Doa(#[from] DoaError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn config_err(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    #[default]
    CoprimeMode,
    GridMusic,
}

impl FromStr for Estimator {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.trim() {
            "coprime-mode" => Ok(Self::CoprimeMode),
            "grid-music" => Ok(Self::GridMusic),
            other => Err(config_err(format!(
                "unknown estimator '{other}' (expected coprime-mode or grid-music)"
            ))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CoprimeMode => "coprime-mode",
            Self::GridMusic => "grid-music",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    Snapshots,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::SnrDb => "snr_db",
            Self::Snapshots => "snapshots",
        }
    }
}

/// Conditions of a single sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub snapshots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub doas: Vec<f64>,
    /// Snapshot count when sweeping SNR.
    pub snapshots: usize,
    /// SNR values; exactly one entry when sweeping snapshots.
    pub snr_db: Vec<f64>,
    /// Snapshot counts; when set, the sweep runs over K.
    pub k_sweep: Option<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub grid_size: usize,
    pub out: Option<PathBuf>,
    pub segments_out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 5,
            n: 7,
            doas: vec![0.1 * std::f64::consts::PI],
            snapshots: 100,
            snr_db: vec![0.0],
            k_sweep: None,
            trials: 200,
            seed: 1,
            estimator: Estimator::CoprimeMode,
            grid_size: 8192,
            out: None,
            segments_out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<CoprimeGeometry, SimError> {
        let geom = CoprimeGeometry::new(self.m, self.n)?;
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        SourceScenario::with_snr_db(self.doas.clone(), 0.0)?;
        let d = self.doas.len();
        if self.estimator == Estimator::CoprimeMode && d >= self.m.min(self.n) {
            return Err(config_err(format!(
                "{d} sources need both subarrays longer than {d} (m={}, n={})",
                self.m, self.n
            )));
        }
        if self.snr_db.is_empty() {
            return Err(config_err("at least one SNR value is required"));
        }
        match &self.k_sweep {
            Some(ks) => {
                if self.snr_db.len() != 1 {
                    return Err(config_err(
                        "sweep either SNR or snapshots, not both (k_sweep needs a single SNR)",
                    ));
                }
                if ks.is_empty() || ks.contains(&0) {
                    return Err(config_err("snapshot counts must be positive"));
                }
            }
            None => {
                if self.snapshots == 0 {
                    return Err(config_err("snapshots must be at least 1"));
                }
            }
        }
        if self.estimator == Estimator::GridMusic && self.grid_size < 4 * self.m * self.n {
            return Err(config_err(format!(
                "grid_size must be at least {}",
                4 * self.m * self.n
            )));
        }
        Ok(geom)
    }

    pub fn axis(&self) -> SweepAxis {
        if self.k_sweep.is_some() {
            SweepAxis::Snapshots
        } else {
            SweepAxis::SnrDb
        }
    }

    /// Sweep points in order of increasing sweep value.
    pub fn sweep_points(&self) -> Vec<(f64, SweepPoint)> {
        let mut points: Vec<(f64, SweepPoint)> = match &self.k_sweep {
            Some(ks) => ks
                .iter()
                .map(|&k| {
                    (
                        k as f64,
                        SweepPoint {
                            snr_db: self.snr_db[0],
                            snapshots: k,
                        },
                    )
                })
                .collect(),
            None => self
                .snr_db
                .iter()
                .map(|&s| {
                    (
                        s,
                        SweepPoint {
                            snr_db: s,
                            snapshots: self.snapshots,
                        },
                    )
                })
                .collect(),
        };
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points
    }

    /// Applies `key = value` settings; unknown keys are rejected.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), SimError> {
        let bad = |what: &str| config_err(format!("invalid {what} '{value}'"));
        match key.trim().replace('-', "_").as_str() {
            "m" => self.m = value.trim().parse().map_err(|_| bad("m"))?,
            "n" => self.n = value.trim().parse().map_err(|_| bad("n"))?,
            "doas" => self.doas = parse_doas(value)?,
            "snapshots" => self.snapshots = value.trim().parse().map_err(|_| bad("snapshots"))?,
            "snr_db" => self.snr_db = parse_f64_sweep(value)?,
            "k_sweep" => {
                self.k_sweep = Some(
                    parse_f64_sweep(value)?
                        .into_iter()
                        .map(|k| {
                            if k >= 1.0 && k.fract() == 0.0 {
                                Ok(k as usize)
                            } else {
                                Err(bad("k_sweep"))
                            }
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
            "trials" => self.trials = value.trim().parse().map_err(|_| bad("trials"))?,
            "seed" => self.seed = value.trim().parse().map_err(|_| bad("seed"))?,
            "estimator" => self.estimator = value.parse()?,
            "grid_size" => self.grid_size = value.trim().parse().map_err(|_| bad("grid_size"))?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "segments_out" => self.segments_out = Some(PathBuf::from(value.trim())),
            other => return Err(config_err(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Flat `key = value` text; `#` starts a comment.
    pub fn from_config_text(text: &str) -> Result<Self, SimError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.apply(key, value)?;
        }
        Ok(cfg)
    }

    /// Settings as sorted `key = value` lines.
    pub fn echo(&self) -> String {
        let mut kv = BTreeMap::new();
        kv.insert("m", self.m.to_string());
        kv.insert("n", self.n.to_string());
        kv.insert("doas", join(self.doas.iter().map(|d| format!("{d:.11e}"))));
        kv.insert("snapshots", self.snapshots.to_string());
        kv.insert("snr_db", join(self.snr_db.iter().map(|s| format!("{s}"))));
        if let Some(ks) = &self.k_sweep {
            kv.insert("k_sweep", join(ks.iter().map(|k| k.to_string())));
        }
        kv.insert("trials", self.trials.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("estimator", self.estimator.to_string());
        kv.insert("grid_size", self.grid_size.to_string());
        if let Some(p) = &self.out {
            kv.insert("out", p.display().to_string());
        }
        kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(",")
}

/// Comma-separated angle literals (`0.1pi`, `-0.5`).
pub fn parse_doas(text: &str) -> Result<Vec<f64>, SimError> {
    text.split(',')
        .map(|t| parse_angle(t).ok_or_else(|| config_err(format!("invalid angle '{}'", t.trim()))))
        .collect()
}

/// `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_f64_sweep(text: &str) -> Result<Vec<f64>, SimError> {
    let text = text.trim();
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| config_err(format!("invalid number '{}'", t.trim())))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (parse(start)?, parse(step)?, parse(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(config_err(format!("invalid range '{text}'")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        [_] => text.split(',').map(parse).collect(),
        _ => Err(config_err(format!("invalid sweep '{text}'"))),
    }
}

/// Outcome of one Monte Carlo trial.
pub type TrialOutcome = Result<Vec<f64>, DoaError>;

/// One trial: synthesize, estimate per subarray, pair and project.
///
/// The generator is seeded with `seed ^ trial_index`, so a trial draws the
/// same random stream at every sweep point.
pub fn run_trial(
    config: &ExperimentConfig,
    geom: &CoprimeGeometry,
    point: SweepPoint,
    trial_index: u64,
) -> TrialOutcome {
    let scenario = SourceScenario::with_snr_db(config.doas.clone(), point.snr_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ trial_index);
    let snaps = synthesize_snapshots_with(geom, &scenario, point.snapshots, &mut rng)?;
    let d = scenario.num_sources();
    match config.estimator {
        Estimator::CoprimeMode => {
            // The step-N subarray resolves psi modulo 2pi/N.
            let step_m = estimate_subarray(&snaps, geom, Subarray::First, d)?;
            let step_n = estimate_subarray(&snaps, geom, Subarray::Second, d)?;
            let pairing = pair_and_project(
                &step_n.reps,
                &step_m.reps,
                geom.m(),
                geom.n(),
                PairingStrategy::Auto,
            )?;
            Ok(pairing.doas)
        }
        Estimator::GridMusic => {
            let r_hat = sample_covariance(&snaps);
            Ok(grid_music(&r_hat, geom, d, config.grid_size)?.peaks)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub mse: Vec<f64>,
    pub crb: Vec<f64>,
    pub gross_error_rate: f64,
    pub failed_trials: usize,
    pub trials: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub wall_time: Duration,
}

/// Runs every sweep point. Trials execute in parallel; per-trial results are
/// reduced in trial order so the numbers do not depend on scheduling.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, SimError> {
    let geom = config.validate()?;
    let started = Instant::now();
    let d = config.doas.len();
    let gross_threshold = std::f64::consts::PI / config.m.max(config.n) as f64;

    let mut rows = Vec::new();
    for (value, point) in config.sweep_points() {
        let t0 = Instant::now();
        let scenario = SourceScenario::with_snr_db(config.doas.clone(), point.snr_db)?;
        let crb = stochastic_crb(&geom, &scenario, point.snapshots)?.bounds;

        let errors: Vec<Option<Vec<f64>>> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| {
                run_trial(config, &geom, point, t)
                    .ok()
                    .and_then(|est| matched_errors(&est, &config.doas).ok())
            })
            .collect();

        let mut sq = vec![0.0; d];
        let mut gross = 0usize;
        let mut failed = 0usize;
        for trial in &errors {
            match trial {
                Some(errs) => {
                    for (s, e) in sq.iter_mut().zip(errs) {
                        *s += e * e;
                    }
                    if errs.iter().any(|e| e.abs() > gross_threshold) {
                        gross += 1;
                    }
                }
                None => {
                    // Failed trials count as worst-case circular error.
                    for s in sq.iter_mut() {
                        *s += std::f64::consts::PI * std::f64::consts::PI;
                    }
                    gross += 1;
                    failed += 1;
                }
            }
        }
        let n = config.trials as f64;
        rows.push(SweepRow {
            sweep_value: value,
            mse: sq.into_iter().map(|s| s / n).collect(),
            crb,
            gross_error_rate: gross as f64 / n,
            failed_trials: failed,
            trials: config.trials,
            wall_time: t0.elapsed(),
        });
    }
    Ok(SweepResult {
        axis: config.axis(),
        rows,
        wall_time: started.elapsed(),
    })
}

fn format_sweep_value(axis: SweepAxis, value: f64) -> String {
    match axis {
        SweepAxis::Snapshots => format!("{}", value as u64),
        SweepAxis::SnrDb => format!("{value:.11e}"),
    }
}

/// CSV with one row per (sweep point, source). Wall time is not included.
pub fn format_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        for (i, (mse, crb)) in row.mse.iter().zip(&row.crb).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{:.11e},{:.11e},{:.11e},{}",
                result.axis.name(),
                format_sweep_value(result.axis, row.sweep_value),
                i,
                mse,
                crb,
                row.gross_error_rate,
                row.trials
            );
        }
    }
    out
}

/// Plain-text run summary: configuration echo, per-point timing and total
/// wall time.
pub fn format_summary(result: &SweepResult, config: &ExperimentConfig) -> String {
    let mut out = String::from("# configuration\n");
    out.push_str(&config.echo());
    out.push_str("\n# results\n");
    for row in &result.rows {
        let ratio: Vec<String> = row
            .mse
            .iter()
            .zip(&row.crb)
            .map(|(m, c)| format!("{:.3}", m / c))
            .collect();
        let _ = writeln!(
            out,
            "{} = {}: mse/crb = [{}], gross = {:.4}, failed = {}, wall = {:.3} s",
            result.axis.name(),
            format_sweep_value(result.axis, row.sweep_value),
            ratio.join(", "),
            row.gross_error_rate,
            row.failed_trials,
            row.wall_time.as_secs_f64()
        );
    }
    let _ = writeln!(
        out,
        "\ntotal wall time: {:.3} s",
        result.wall_time.as_secs_f64()
    );
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), SimError> {
    fs::write(path, contents).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the CSV, the `<out>.summary.txt` run summary and, when configured,
/// the segment lookup table. Returns the paths written.
pub fn emit_outputs(
    result: &SweepResult,
    config: &ExperimentConfig,
) -> Result<Vec<PathBuf>, SimError> {
    let mut written = Vec::new();
    if let Some(out) = &config.out {
        write_file(out, &format_csv(result))?;
        written.push(out.clone());
        let mut summary = out.clone().into_os_string();
        summary.push(".summary.txt");
        let summary = PathBuf::from(summary);
        write_file(&summary, &format_summary(result, config))?;
        written.push(summary);
    }
    if let Some(seg) = &config.segments_out {
        let map = SegmentMap::new(config.m, config.n)?;
        write_file(seg, &map.to_csv())?;
        written.push(seg.clone());
    }
    Ok(written)
}
