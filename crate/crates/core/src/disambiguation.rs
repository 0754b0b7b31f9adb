//! Resolving subarray ambiguities by projection onto the oblique segments of
//! the residue torus.
//!
//! A subarray with step `N` determines `psi` only modulo `2pi/N`, so it
//! reports a representative in `[-pi, -pi + 2pi/N)`; likewise for step `M`.
//! As `psi` sweeps `[-pi, pi)` the residue pair traces `M + N - 1` parallel
//! slope-one segments through the rectangle of representatives. Coprimality
//! makes that map a bijection, so the nearest segment point of a measured
//! residue pair yields a unique angle.
//!
//! Angles are handled in units of `u = 2pi/(MN)` where convenient: the
//! step-`N` breakpoints sit at `t = kM`, the step-`M` ones at `t = lN`, and a
//! segment with lifts `(k, l)` lies on the line `rep_n - rep_m = (lN - kM) u`.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use itertools::Itertools;

use crate::angle::{wrap_difference, wrap_half_open};
use crate::array_model::check_coprime_pair;
use crate::error::{DoaError, Result};
use crate::mode::fold_to_fundamental;

/// Slack allowed on fundamental-interval membership checks.
const INTERVAL_SLACK: f64 = 1e-12;

/// Strategies with `D <= EXHAUSTIVE_LIMIT` sources default to exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 6;

/// One oblique segment: `psi in [psi_lo, psi_hi)` with
/// `psi = rep_n + k 2pi/N = rep_m + l 2pi/M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub psi_lo: f64,
    pub psi_hi: f64,
    pub k: usize,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMap {
    m: usize,
    n: usize,
    breakpoints: Vec<f64>,
    segments: Vec<Segment>,
}

impl SegmentMap {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        check_coprime_pair(m, n)?;
        let unit = unit(m, n);
        let ticks: Vec<usize> = (0..n)
            .map(|k| k * m)
            .chain((0..m).map(|l| l * n))
            .sorted()
            .dedup()
            .collect();
        let segments = ticks
            .iter()
            .enumerate()
            .map(|(i, &t0)| {
                let t1 = ticks.get(i + 1).copied().unwrap_or(m * n);
                Segment {
                    psi_lo: -PI + t0 as f64 * unit,
                    psi_hi: -PI + t1 as f64 * unit,
                    k: t0 / m,
                    l: t0 / n,
                }
            })
            .collect();
        let breakpoints = ticks.iter().map(|&t| -PI + t as f64 * unit).collect();
        Ok(Self {
            m,
            n,
            breakpoints,
            segments,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Segment start points, ascending, beginning at `-pi`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Index of the segment whose half-open interval contains `psi`.
    pub fn segment_index(&self, psi: f64) -> usize {
        let psi = wrap_half_open(psi);
        self.breakpoints
            .partition_point(|&b| b <= psi)
            .saturating_sub(1)
    }

    /// `(rep_n, rep_m)` of an angle.
    pub fn residues(&self, psi: f64) -> (f64, f64) {
        residues(psi, self.m, self.n)
    }

    /// CSV lookup table with header `segment_index,psi_lo,psi_hi,k,l`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment_index,psi_lo,psi_hi,k,l\n");
        for (i, s) in self.segments.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{:.11e},{:.11e},{},{}",
                s.psi_lo, s.psi_hi, s.k, s.l
            );
        }
        out
    }

    /// Aligned text rendering of the lookup table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>7}  {:>19}  {:>19}  {:>3}  {:>3}\n",
            "segment", "psi_lo", "psi_hi", "k", "l"
        );
        for (i, s) in self.segments.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i:>7}  {:>19.11e}  {:>19.11e}  {:>3}  {:>3}",
                s.psi_lo, s.psi_hi, s.k, s.l
            );
        }
        out
    }
}

fn unit(m: usize, n: usize) -> f64 {
    TAU / (m * n) as f64
}

/// Representatives of `psi` modulo `2pi/N` and modulo `2pi/M`.
pub fn residues(psi: f64, m: usize, n: usize) -> (f64, f64) {
    // fold(s * psi, s) is psi reduced modulo 2pi/s.
    let psi = wrap_half_open(psi);
    (
        fold_to_fundamental(psi * n as f64, n),
        fold_to_fundamental(psi * m as f64, m),
    )
}

/// Result of projecting one residue pair onto the segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionResult {
    pub psi: f64,
    /// Squared torus distance from the measured pair to the segment set.
    pub cost: f64,
    /// `(k, l)` alias indices of the segment containing `psi`.
    pub lifts: (usize, usize),
}

fn check_interval(value: f64, spacing: usize) -> Result<()> {
    let lo = -PI;
    let hi = -PI + TAU / spacing as f64;
    if !(value >= lo - INTERVAL_SLACK && value < hi + INTERVAL_SLACK) {
        return Err(DoaError::OutsideFundamental { value, lo, hi });
    }
    Ok(())
}

/// The cost minimized by [`project_single`]: squared circular distance to the
/// nearest alias in each coordinate.
pub fn torus_cost(psi: f64, rep_n: f64, rep_m: f64, m: usize, n: usize) -> f64 {
    let alias_distance = |rep: f64, spacing: usize| {
        let period = TAU / spacing as f64;
        let x = psi - rep;
        x - period * (x / period).round()
    };
    let dn = alias_distance(rep_n, n);
    let dm = alias_distance(rep_m, m);
    dn * dn + dm * dm
}

/// Nearest point on the oblique segments to `(rep_n, rep_m)`.
///
/// `rep_n` is the representative modulo `2pi/N` (from the step-`N` subarray),
/// `rep_m` modulo `2pi/M`.
pub fn project_single(rep_n: f64, rep_m: f64, m: usize, n: usize) -> Result<ProjectionResult> {
    check_coprime_pair(m, n)?;
    check_interval(rep_n, n)?;
    check_interval(rep_m, m)?;
    let period_n = TAU / n as f64;
    let period_m = TAU / m as f64;

    let mut best: Option<(f64, f64)> = None;
    for k in 0..n {
        let a = rep_n + k as f64 * period_n;
        for l in 0..m {
            let b = rep_m + l as f64 * period_m;
            let delta = wrap_difference(a - b);
            let cost = 0.5 * delta * delta;
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, wrap_half_open(b + 0.5 * delta)));
            }
        }
    }
    let (cost, psi) = best.expect("at least one lift pair");
    Ok(ProjectionResult {
        psi,
        cost,
        lifts: lifts_of(psi, m, n),
    })
}

/// `(k, l)` with `psi` in `[-pi + k 2pi/N, ...)` and `[-pi + l 2pi/M, ...)`.
fn lifts_of(psi: f64, m: usize, n: usize) -> (usize, usize) {
    let x = wrap_half_open(psi) + PI;
    let k = ((x / (TAU / n as f64)).floor() as usize).min(n - 1);
    let l = ((x / (TAU / m as f64)).floor() as usize).min(m - 1);
    (k, l)
}

/// Lower end of the segment with lifts `(k, l)`.
///
/// The pair is on a segment iff its line offset `c = lN - kM` satisfies
/// `-N < c < M`; the segment then starts at `max(kM, lN)` in units of
/// `2pi/(MN)`.
pub fn residues_to_psi_crt(k: usize, l: usize, m: usize, n: usize) -> Result<f64> {
    check_coprime_pair(m, n)?;
    if k >= n || l >= m {
        return Err(DoaError::InconsistentLifts { k, l });
    }
    let offset = (l * n) as i64 - (k * m) as i64;
    if offset <= -(n as i64) || offset >= m as i64 {
        return Err(DoaError::InconsistentLifts { k, l });
    }
    Ok(-PI + (k * m).max(l * n) as f64 * unit(m, n))
}

/// Lifts `(k, l)` of the segment on the line `rep_n - rep_m = c 2pi/(MN)`,
/// solved from `lN == c (mod M)` and `kM == -c (mod N)`.
pub fn lifts_from_offset(c: i64, m: usize, n: usize) -> Result<(usize, usize)> {
    check_coprime_pair(m, n)?;
    let (mi, ni) = (m as i64, n as i64);
    if c <= -ni || c >= mi {
        return Err(DoaError::InvalidArgument(format!(
            "line offset {c} outside ({}, {m})",
            -ni
        )));
    }
    let l = (c * mod_inverse(ni, mi)).rem_euclid(mi);
    let k = (-c * mod_inverse(mi, ni)).rem_euclid(ni);
    Ok((k as usize, l as usize))
}

fn mod_inverse(a: i64, modulus: i64) -> i64 {
    // Extended Euclid; inputs are coprime.
    let (mut r0, mut r1) = (a.rem_euclid(modulus), modulus);
    let (mut s0, mut s1) = (1i64, 0i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    s0.rem_euclid(modulus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairingStrategy {
    /// All `D!` assignments.
    Exhaustive,
    /// Cheapest remaining pair first.
    Greedy,
    /// Exhaustive up to [`EXHAUSTIVE_LIMIT`] sources, greedy above.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairingResult {
    /// `assignment[i]` is the step-`M` index paired with step-`N` estimate `i`.
    pub assignment: Vec<usize>,
    pub doas: Vec<f64>,
    pub costs: Vec<f64>,
    pub total_cost: f64,
    /// Strategy actually used (never `Auto`).
    pub strategy: PairingStrategy,
}

/// Pairs the two subarrays' representatives and projects each pair.
pub fn pair_and_project(
    reps_n: &[f64],
    reps_m: &[f64],
    m: usize,
    n: usize,
    strategy: PairingStrategy,
) -> Result<PairingResult> {
    if reps_n.len() != reps_m.len() {
        return Err(DoaError::LengthMismatch {
            left: reps_n.len(),
            right: reps_m.len(),
        });
    }
    let d = reps_n.len();
    if d == 0 {
        return Err(DoaError::InvalidArgument("no estimates to pair".into()));
    }
    let table: Vec<Vec<ProjectionResult>> = reps_n
        .iter()
        .map(|&a| {
            reps_m
                .iter()
                .map(|&b| project_single(a, b, m, n))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let strategy = match strategy {
        PairingStrategy::Auto if d <= EXHAUSTIVE_LIMIT => PairingStrategy::Exhaustive,
        PairingStrategy::Auto => PairingStrategy::Greedy,
        s => s,
    };
    let assignment = match strategy {
        PairingStrategy::Exhaustive => exhaustive_assignment(&table),
        _ => greedy_assignment(&table),
    };
    let picked: Vec<ProjectionResult> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| table[i][j])
        .collect();
    let costs: Vec<f64> = picked.iter().map(|p| p.cost).collect();
    Ok(PairingResult {
        doas: picked.iter().map(|p| p.psi).collect(),
        total_cost: costs.iter().sum(),
        costs,
        assignment,
        strategy,
    })
}

fn assignment_cost(table: &[Vec<ProjectionResult>], perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(i, &j)| table[i][j].cost)
        .sum()
}

fn exhaustive_assignment(table: &[Vec<ProjectionResult>]) -> Vec<usize> {
    let d = table.len();
    // Lexicographic enumeration; strict comparison keeps the first minimum.
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..d).permutations(d) {
        let cost = assignment_cost(table, &perm);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, perm));
        }
    }
    best.expect("at least one permutation").1
}

fn greedy_assignment(table: &[Vec<ProjectionResult>]) -> Vec<usize> {
    let d = table.len();
    let mut assignment = vec![usize::MAX; d];
    let mut used = vec![false; d];
    for _ in 0..d {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in table.iter().enumerate() {
            if assignment[i] != usize::MAX {
                continue;
            }
            for (j, p) in row.iter().enumerate() {
                if !used[j] && best.is_none_or(|(c, _, _)| p.cost < c) {
                    best = Some((p.cost, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("a free pair remains");
        assignment[i] = j;
        used[j] = true;
    }
    assignment
}
