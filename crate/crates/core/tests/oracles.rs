//! Operation-level checks against independent oracles.

mod common;

use std::f64::consts::{PI, TAU};

use itertools::Itertools;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coprime_doa::disambiguation::{lifts_from_offset, torus_cost};
use coprime_doa::mode::{mode_fit_iterates, mode_objective, polynomial_roots};
use coprime_doa::sim::{format_csv, run_sweep, ExperimentConfig};
use coprime_doa::*;

use common::*;

#[test]
fn crb_matches_numerical_fisher_information() {
    let geom = CoprimeGeometry::new(5, 7).unwrap();
    let sc = SourceScenario::with_snr_db(vec![0.1 * PI], 0.0).unwrap();
    let crb = stochastic_crb(&geom, &sc, 100).unwrap().bounds[0];
    let fim = numerical_fim_bounds(
        geom.positions(),
        sc.doas(),
        sc.powers(),
        sc.noise_power(),
        100,
    )[0];
    assert!((crb - fim).abs() <= 0.01 * fim, "crb {crb} vs fim {fim}");
}

#[test]
fn crb_matches_numerical_fisher_information_two_sources() {
    // Two sources exercise the off-diagonal coupling; the closed form assumes
    // an arbitrary source covariance, the oracle only diagonal powers, so
    // this is a looser sanity band rather than an identity.
    let geom = CoprimeGeometry::new(5, 7).unwrap();
    let sc = SourceScenario::with_snr_db(vec![-0.7, 0.9], 5.0).unwrap();
    let crb = stochastic_crb(&geom, &sc, 100).unwrap().bounds;
    let fim = numerical_fim_bounds(
        geom.positions(),
        sc.doas(),
        sc.powers(),
        sc.noise_power(),
        100,
    );
    for (c, f) in crb.iter().zip(&fim) {
        assert!(
            *c >= f * 0.99,
            "closed form {c} below diagonal-power bound {f}"
        );
        assert!(*c <= f * 1.10, "closed form {c} far above {f}");
    }
}

#[test]
fn projection_matches_grid_for_perturbed_two_three() {
    let (m, n) = (3, 2);
    let psi = 0.9 * PI;
    let (rn, rm) = residues(psi, m, n);
    let (rn, rm) = (rn + 0.01, rm - 0.01);
    let p = project_single(rn, rm, m, n).unwrap();
    assert!(circular_gap(p.psi, psi) < 0.011);
    let (g_psi, g_cost) = grid_minimizer(rn, rm, m, n, 1_000_000);
    assert!(circular_gap(p.psi, g_psi) <= TAU / 1e6);
    assert!((oracle_cost(p.psi, rn, rm, m, n) - p.cost).abs() < 1e-12);
    assert!(p.cost <= g_cost + 1e-12);
    assert!((torus_cost(p.psi, rn, rm, m, n) - p.cost).abs() < 1e-12);
}

#[test]
fn segment_grid_partition_and_round_trip() {
    for (m, n) in [(3, 2), (5, 7), (7, 5), (4, 9)] {
        let map = SegmentMap::new(m, n).unwrap();
        assert_eq!(map.segments().len(), m + n - 1);
        let count = (2.0 * PI / 1e-4) as usize;
        for i in 0..count {
            let psi = -PI + i as f64 * 1e-4;
            let owners: Vec<usize> = map
                .segments()
                .iter()
                .positions(|s| s.psi_lo <= psi && psi < s.psi_hi)
                .collect();
            assert_eq!(owners.len(), 1, "psi {psi}");
            assert_eq!(owners[0], map.segment_index(psi));
            let s = map.segments()[owners[0]];
            let (rn, rm) = map.residues(psi);
            assert!((rn + s.k as f64 * TAU / n as f64 - psi).abs() < 1e-9);
            assert!((rm + s.l as f64 * TAU / m as f64 - psi).abs() < 1e-9);
        }
    }
}

#[test]
fn breakpoints_are_union_of_alias_grids() {
    let (m, n) = (5, 7);
    let map = SegmentMap::new(m, n).unwrap();
    let mut expected: Vec<f64> = (0..n)
        .map(|k| -PI + k as f64 * TAU / n as f64)
        .chain((1..m).map(|l| -PI + l as f64 * TAU / m as f64))
        .collect();
    expected.sort_by(f64::total_cmp);
    assert_eq!(expected.len(), map.breakpoints().len());
    for (a, b) in expected.iter().zip(map.breakpoints()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn residue_map_is_injective_on_fine_grid() {
    let (m, n) = (5, 7);
    let step = TAU / (4 * m * n) as f64;
    let pts: Vec<(f64, f64)> = (0..4 * m * n)
        .map(|i| residues(-PI + i as f64 * step, m, n))
        .collect();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let same = (pts[i].0 - pts[j].0).abs() < 1e-9 && (pts[i].1 - pts[j].1).abs() < 1e-9;
            assert!(!same, "grid points {i} and {j} share residues");
        }
    }
}

#[test]
fn crt_enumeration_counts_and_agrees_with_table() {
    for (m, n) in [(3, 2), (5, 7), (2, 9)] {
        let map = SegmentMap::new(m, n).unwrap();
        let consistent: Vec<(usize, usize)> = (0..n)
            .cartesian_product(0..m)
            .filter(|&(k, l)| residues_to_psi_crt(k, l, m, n).is_ok())
            .collect();
        assert_eq!(consistent.len(), m + n - 1);
        for s in map.segments() {
            assert_eq!(residues_to_psi_crt(s.k, s.l, m, n).unwrap(), s.psi_lo);
            let offset = (s.l * n) as i64 - (s.k * m) as i64;
            assert_eq!(lifts_from_offset(offset, m, n).unwrap(), (s.k, s.l));
        }
    }
}

#[test]
fn exhaustive_pairing_beats_every_permutation() {
    let (m, n) = (5, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for d in 1..=4 {
        for _ in 0..50 {
            let reps_n: Vec<f64> = (0..d)
                .map(|_| -PI + rng.random::<f64>() * TAU / n as f64)
                .collect();
            let reps_m: Vec<f64> = (0..d)
                .map(|_| -PI + rng.random::<f64>() * TAU / m as f64)
                .collect();
            let best =
                pair_and_project(&reps_n, &reps_m, m, n, PairingStrategy::Exhaustive).unwrap();
            for perm in (0..d).permutations(d) {
                let cost: f64 = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| project_single(reps_n[i], reps_m[j], m, n).unwrap().cost)
                    .sum();
                assert!(best.total_cost <= cost + 1e-15);
            }
            let sum: f64 = best.costs.iter().sum();
            assert_eq!(sum, best.total_cost);
        }
    }
}

/// Share of trials in which greedy pairing reaches the exhaustive optimum, for
/// three random sources whose subarray residues are jittered by `+-jitter`.
fn greedy_optimality_rate(jitter: f64, trials: usize, seed: u64) -> usize {
    let (m, n) = (5, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut equal = 0;
    for _ in 0..trials {
        let truth: Vec<f64> = (0..3).map(|_| rng.random_range(-PI..PI)).collect();
        let mut reps_n = Vec::new();
        let mut reps_m = Vec::new();
        for &psi in &truth {
            let (rn, rm) = residues(psi, m, n);
            let mut perturb = |r: f64, p: usize| {
                fold_to_fundamental((r + rng.random_range(-jitter..jitter)) * p as f64, p)
            };
            reps_n.push(perturb(rn, n));
            reps_m.push(perturb(rm, m));
        }
        let ex = pair_and_project(&reps_n, &reps_m, m, n, PairingStrategy::Exhaustive).unwrap();
        let gr = pair_and_project(&reps_n, &reps_m, m, n, PairingStrategy::Greedy).unwrap();
        assert!(ex.total_cost <= gr.total_cost + 1e-15);
        if gr.total_cost - ex.total_cost <= 1e-15 {
            equal += 1;
        }
    }
    equal
}

#[test]
fn greedy_versus_exhaustive_rate() {
    for jitter in [0.002, 0.005, 0.01, 0.02, 0.05] {
        let equal = greedy_optimality_rate(jitter, 1000, 4);
        println!("jitter {jitter}: greedy matched exhaustive in {equal}/1000 trials");
        if jitter <= 0.002 {
            assert!(
                equal >= 900,
                "greedy optimality rate {equal}/1000 at jitter {jitter}"
            );
        }
    }
}

#[test]
fn roots_satisfy_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let b = random_symmetric_coefficients(&mut rng, 3);
        let coeffs = ModeCoefficients::from_coefficients(b.clone()).unwrap();
        let roots = polynomial_roots(&b).unwrap();
        assert_eq!(roots.len(), 3);
        for z in roots {
            assert!(coeffs.eval(z).norm() < 1e-8, "b(z) = {}", coeffs.eval(z));
        }
    }
}

fn subarray_decomposition(
    geom: &CoprimeGeometry,
    which: Subarray,
    doas: &[f64],
    snr_db: f64,
    k: usize,
    seed: u64,
) -> SubspaceDecomposition {
    let sc = SourceScenario::with_snr_db(doas.to_vec(), snr_db).unwrap();
    let snaps = synthesize_snapshots(geom, &sc, k, seed).unwrap();
    let rows = snaps.select_rows(geom.subarray_indices(which));
    decompose(&sample_covariance(&rows), doas.len()).unwrap()
}

#[test]
fn mode_fit_beats_random_feasible_coefficients() {
    let geom = CoprimeGeometry::new(5, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..100u64 {
        let d = 1 + (trial % 2) as usize;
        let doas: Vec<f64> = (0..d)
            .map(|i| -0.8 + 1.1 * i as f64 + rng.random_range(-0.1..0.1))
            .collect();
        let which = if trial % 3 == 0 {
            Subarray::Second
        } else {
            Subarray::First
        };
        let sub = subarray_decomposition(&geom, which, &doas, 5.0, 100, trial);
        let b = mode_fit(&sub, 2).unwrap();
        let f = mode_objective_reference(&sub.e_s, &sub.lambda_s, sub.sigma2_hat, b.coefficients());
        let f_lib = mode_objective(&sub, b.coefficients()).unwrap();
        assert!((f - f_lib).abs() <= 1e-9 * f.max(1e-12));
        for _ in 0..64 {
            let r = random_symmetric_coefficients(&mut rng, d);
            let fr = mode_objective_reference(&sub.e_s, &sub.lambda_s, sub.sigma2_hat, &r);
            assert!(f <= fr, "trial {trial}: fit {f} vs random {fr}");
        }
    }
}

#[test]
fn reweighting_rarely_increases_objective() {
    let geom = CoprimeGeometry::new(5, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let trials = 400;
    let mut non_increasing = 0;
    for trial in 0..trials {
        let doas = [rng.random_range(-PI..PI)];
        let sub = subarray_decomposition(&geom, Subarray::First, &doas, 0.0, 50, trial);
        let it = mode_fit_iterates(&sub, 2).unwrap();
        let f1 = mode_objective(&sub, it[0].coefficients()).unwrap();
        let f2 = mode_objective(&sub, it[1].coefficients()).unwrap();
        if f2 <= f1 * (1.0 + 1e-12) {
            non_increasing += 1;
        }
    }
    println!("objective non-increasing in {non_increasing}/{trials} trials");
    assert!(non_increasing as f64 >= 0.95 * trials as f64);
}

#[test]
fn noiseless_subarray_estimates_fold_truth() {
    let geom = CoprimeGeometry::new(5, 7).unwrap();
    let psi = 0.1 * PI;
    let sc = SourceScenario::new(vec![psi], vec![1.0], 0.0).unwrap();
    let snaps = synthesize_snapshots(&geom, &sc, 20, 1).unwrap();

    let second = estimate_subarray(&snaps, &geom, Subarray::Second, 1).unwrap();
    assert_eq!(second.spacing, 7);
    assert!((second.reps[0] - fold_to_fundamental(0.7 * PI, 7)).abs() < 1e-8);
    assert!((second.reps[0] + 0.757_142_857_142_857 * PI).abs() < 1e-8);

    let first = estimate_subarray(&snaps, &geom, Subarray::First, 1).unwrap();
    assert_eq!(first.spacing, 5);
    assert!((first.reps[0] + 0.7 * PI).abs() < 1e-8);

    let doas = [-0.35 * PI, 0.42 * PI];
    let sc = SourceScenario::new(doas.to_vec(), vec![1.0, 2.0], 0.0).unwrap();
    let snaps = synthesize_snapshots(&geom, &sc, 40, 2).unwrap();
    for which in [Subarray::First, Subarray::Second] {
        let est = estimate_subarray(&snaps, &geom, which, 2).unwrap();
        let s = geom.spacing(which);
        let mut expected: Vec<f64> = doas
            .iter()
            .map(|p| fold_to_fundamental(p * s as f64, s))
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in est.reps.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-6, "{which:?}: {a} vs {b}");
        }
    }
}

#[test]
fn mode_coefficients_are_conjugate_symmetric() {
    let geom = CoprimeGeometry::new(5, 7).unwrap();
    for d in 1..=3 {
        let doas: Vec<f64> = (0..d).map(|i| -1.0 + 0.9 * i as f64).collect();
        let sub = subarray_decomposition(&geom, Subarray::First, &doas, 10.0, 200, d as u64);
        let b = mode_fit(&sub, 2).unwrap();
        let c = b.coefficients();
        for k in 0..=d {
            assert_eq!(c[k], c[d - k].conj());
        }
        let lead: Complex64 = c[0];
        assert!(lead.re > 0.0 || (lead.re == 0.0 && lead.im >= 0.0));
    }
}

#[test]
fn sweep_rows_and_crb_scaling() {
    let cfg = ExperimentConfig {
        snr_db: vec![120.0],
        trials: 1,
        ..Default::default()
    };
    let res = run_sweep(&cfg).unwrap();
    assert_eq!(res.rows.len(), 1);
    assert!(res.rows[0].mse[0] < 1e-16);
    assert!(res.rows[0].crb[0] > 0.0);

    let cfg = ExperimentConfig {
        snr_db: vec![0.0],
        k_sweep: Some(vec![400, 100, 200]),
        trials: 5,
        ..Default::default()
    };
    let res = run_sweep(&cfg).unwrap();
    let values: Vec<f64> = res.rows.iter().map(|r| r.sweep_value).collect();
    assert_eq!(values, vec![100.0, 200.0, 400.0]);
    for w in res.rows.windows(2) {
        assert!((w[0].crb[0] / w[1].crb[0] - 2.0).abs() < 1e-12);
    }
}

#[test]
fn snr_sweep_mse_is_nearly_monotone() {
    let cfg = ExperimentConfig {
        snr_db: (0..=10).map(|i| -20.0 + 4.0 * i as f64).collect(),
        snapshots: 100,
        trials: 500,
        seed: 3,
        ..Default::default()
    };
    let res = run_sweep(&cfg).unwrap();
    let inversions = res
        .rows
        .windows(2)
        .filter(|w| w[1].mse[0] > w[0].mse[0])
        .count();
    assert!(inversions <= 1, "{}", format_csv(&res));
    assert!(res
        .rows
        .iter()
        .all(|r| (0.0..=1.0).contains(&r.gross_error_rate)));
}

#[test]
fn grid_music_baseline_sweep_runs() {
    let cfg = ExperimentConfig {
        snr_db: vec![10.0],
        trials: 20,
        estimator: coprime_doa::sim::Estimator::GridMusic,
        ..Default::default()
    };
    let res = run_sweep(&cfg).unwrap();
    assert!(res.rows[0].mse[0] < 1e-4);
}
