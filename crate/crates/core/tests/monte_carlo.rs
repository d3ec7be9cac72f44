//! Seeded statistical checks of the solver, the certificate diagnostics and
//! the experiment harness.

mod common;

use common::median;
use liftdeconv::certificate::neumann_term_norms;
use liftdeconv::harness::{
    certificate_experiment, grid_trials, ordered_map, phase_diagram, run_sparse_trial, run_trial, trial_instance,
    write_certificate_csv, write_phase_csv, write_trials_csv, Axis, GridSpec, TrialConfig,
};
use liftdeconv::io::VarianceMode;
use liftdeconv::lifting::{gen_subspaces, normal_apply, synthesize, CMatrix, GroundTruth, LiftedMatrix};
use liftdeconv::rng::{derive_seed, GaussianStream};
use liftdeconv::solver::{
    alm_solve, init_factors, lagrangian_grad, lagrangian_value, lbfgs_minimize, pack, unpack, LbfgsParams, SolverConfig,
};
use liftdeconv::spectral::FilterSpec;
use liftdeconv::superres::{random_trains, superres_pipeline, superres_trial, TrainLevels, TrialSpec, WaveletBasis, WaveletKind};
use liftdeconv::tangent::tangent_normal_deviation;
use liftdeconv::C64;

fn config(outer: usize) -> TrialConfig {
    TrialConfig {
        solver: SolverConfig::multipliers(outer),
        variance: VarianceMode::InvLen,
    }
}

fn averaged_deviation(len: usize, dim: usize, channels: usize, ensembles: usize, seed: u64) -> f64 {
    let mut s = GaussianStream::new(seed);
    let x = LiftedMatrix(CMatrix::from_fn(len, dim * channels, |_, _| s.complex_normal()));
    let mut acc = CMatrix::zeros(len, dim * channels);
    for e in 0..ensembles {
        let ens = gen_subspaces(len, dim, channels, derive_seed(seed, e as u64, 1), 1.0 / len as f64).unwrap();
        acc += normal_apply(&x, &ens).unwrap().0;
    }
    acc /= C64::new(ensembles as f64, 0.0);
    (acc - &x.0).norm() / x.norm()
}

#[test]
fn normal_operator_averages_to_identity() {
    assert!(averaged_deviation(64, 2, 8, 200, 1) < 0.15);
    let medians: Vec<f64> = [50, 200, 800]
        .iter()
        .map(|&e| median(&(0..5).map(|r| averaged_deviation(16, 2, 4, e, 100 + r)).collect::<Vec<_>>()))
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
    // 1/sqrt(ensembles) predicts a factor 4 over a 16-fold increase
    assert!(medians[2] < medians[0] / 2.0, "{medians:?}");
}

#[test]
fn small_instances_recover() {
    let ok = (0..10).filter(|&s| run_trial(2, 16, 5, s, &config(8)).unwrap().success).count();
    assert!(ok >= 7, "{ok}/10");
}

#[test]
fn square_regime_fails() {
    let ok = (0..20).filter(|&s| run_trial(8, 8, 40, s, &config(8)).unwrap().success).count();
    assert!(ok <= 2, "{ok}/20");
}

#[test]
fn successful_solves_are_feasible() {
    for seed in 0..10 {
        let rec = run_trial(2, 32, 10, seed, &config(12)).unwrap();
        if rec.success {
            assert!(rec.feasibility < 1e-4, "seed {seed}: {}", rec.feasibility);
        }
    }
}

#[test]
fn recovery_is_invariant_to_ensemble_scale() {
    let solver = SolverConfig {
        seed: 3,
        ..SolverConfig::multipliers(12)
    };
    let (len, dim, channels) = (32, 2, 10);
    let mut compared = 0;
    for seed in 0..4 {
        let (ens, gt) = trial_instance(dim, len, channels, None, seed, VarianceMode::InvLen).unwrap();
        let unit = ens.scaled((len as f64).sqrt()).unwrap();
        let gt_unit = GroundTruth::new(gt.h.clone(), gt.m.iter().map(|v| v / (len as f64).sqrt()).collect(), dim).unwrap();
        let y = synthesize(&gt, &ens).unwrap();
        let y_unit = synthesize(&gt_unit, &unit).unwrap();
        assert!((&y.0 - &y_unit.0).norm() < 1e-12 * y.norm());
        let a = alm_solve(&y, &ens, &solver, Some(&gt)).unwrap().rel_error.unwrap();
        let b = alm_solve(&y_unit, &unit, &solver, Some(&gt_unit)).unwrap().rel_error.unwrap();
        if a < 0.02 && b < 0.02 {
            assert!((a - b).abs() < 1e-6, "seed {seed}: {a} vs {b}");
            compared += 1;
        }
    }
    assert!(compared >= 3);
}

#[test]
fn armijo_steps_never_increase_the_lagrangian() {
    let (ens, gt) = trial_instance(2, 32, 8, None, 4, VarianceMode::InvLen).unwrap();
    let y = synthesize(&gt, &ens).unwrap();
    let lambda = liftdeconv::lifting::MeasurementSet::zeros(32, 8);
    let x0 = pack(&init_factors(32, 2, 8, 4, 9).unwrap());
    let params = LbfgsParams {
        max_iters: 60,
        ..LbfgsParams::default()
    };
    let out = lbfgs_minimize(
        |v| {
            let x = unpack(v, 32, 16, 4);
            let f = lagrangian_value(&x, &lambda, 10.0, &y, &ens).unwrap();
            let (g1, g2) = lagrangian_grad(&x, &lambda, 10.0, &y, &ens).unwrap();
            (f, pack(&liftdeconv::lifting::FactoredMatrix { r1: g1, r2: g2 }))
        },
        x0,
        &params,
    );
    assert!(out.history.len() > 10);
    assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn neumann_ratio_tends_to_tangent_deviation() {
    let mut decaying = 0;
    for t in 0..20u64 {
        let seed = derive_seed(7, 0, t);
        let (ens, gt) = trial_instance(4, 128, 32, None, seed, VarianceMode::InvLen).unwrap();
        let terms = neumann_term_norms(&gt, &ens, 40).unwrap();
        let ratio = terms[40] / terms[39];
        let dev = tangent_normal_deviation(&ens, &gt, 300).unwrap();
        assert!((ratio - dev).abs() < 0.03, "seed {t}: ratio {ratio}, deviation {dev}");
        if ratio < 1.0 {
            decaying += 1;
        }
    }
    // 15 of these 20 instances lie in the contraction regime.
    assert!(decaying >= 14, "{decaying}/20");
}

#[test]
fn deviation_concentrates_as_dimensions_double() {
    let med = |l: usize, n: usize| {
        median(
            &certificate_experiment(2, l, n, 8, 3, 2.0, 100, VarianceMode::InvLen)
                .unwrap()
                .iter()
                .map(|r| r.tangent_deviation)
                .collect::<Vec<_>>(),
        )
    };
    assert!(med(128, 32) < med(64, 16));
}

#[test]
fn harness_output_is_reproducible() {
    let grid = GridSpec {
        rows: (Axis::K, vec![1, 2]),
        cols: (Axis::LOverK, vec![2, 8]),
        k: 1,
        l: 1,
        n: 6,
        s: None,
        trials: 3,
        base_seed: 42,
    };
    let csv = |cells| {
        let mut buf = Vec::new();
        write_phase_csv(&mut buf, cells).unwrap();
        buf
    };
    let a = phase_diagram(&grid, &config(4)).unwrap();
    let b = phase_diagram(&grid, &config(4)).unwrap();
    assert_eq!(csv(&a), csv(&b));

    // trial order and values do not depend on scheduling
    let parallel: Vec<_> = grid_trials(&grid, &config(4)).unwrap().into_iter().flatten().collect();
    let cells = grid.cells().unwrap();
    let mut serial = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        for t in 0..grid.trials {
            let seed = derive_seed(grid.base_seed, ci as u64, t as u64);
            serial.push(run_sparse_trial(cell.k, cell.l, cell.n, cell.s, seed, &config(4)).unwrap());
        }
    }
    let bytes = |recs: &[_]| {
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, recs, false).unwrap();
        buf
    };
    assert_eq!(bytes(&parallel), bytes(&serial));
    assert_eq!(ordered_map((0..100).collect(), |i: i32| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
}

#[test]
fn certificate_csv_is_reproducible() {
    let run = || {
        let rows = certificate_experiment(2, 32, 16, 3, 9, 2.0, 20, VarianceMode::InvLen).unwrap();
        let mut buf = Vec::new();
        write_certificate_csv(&mut buf, &rows).unwrap();
        buf
    };
    assert_eq!(run(), run());
}

#[test]
fn spike_filter_recovers_like_dense() {
    let rate = |s: Option<usize>| {
        (0..10)
            .filter(|&t| run_sparse_trial(4, 64, 40, s, derive_seed(11, t, 0), &config(8)).unwrap().success)
            .count()
    };
    let (spike, dense) = (rate(Some(1)), rate(None));
    assert!(spike.abs_diff(dense) <= 2, "spike {spike}, dense {dense}");
}

#[test]
fn success_needs_a_few_channels() {
    let rate = |n: usize| {
        (0..10)
            .filter(|&s| run_trial(4, 64, n, derive_seed(5, n as u64, s), &config(8)).unwrap().success)
            .count()
    };
    assert!(rate(2) <= 2);
    for n in [8, 16, 40] {
        assert!(rate(n) >= 9, "N = {n}");
    }
}

#[test]
fn all_pass_filter_returns_the_inputs() {
    let basis = WaveletBasis::full(WaveletKind::Haar, 128).unwrap();
    let signals = random_trains(4, 4, 3, &basis, TrainLevels::default()).unwrap();
    let res = superres_pipeline(&signals, FilterSpec::new(128, 1e6, 64).unwrap(), 4, &basis, &SolverConfig::superres())
        .unwrap();
    assert!(res.max_signal_error() < 1e-3, "{:?}", res.signal_errors);
}

#[test]
fn single_frame_superres_fails() {
    let spec = TrialSpec {
        channels: 1,
        dim: 6,
        filter: FilterSpec::new(128, 8.0, 16).unwrap(),
        basis: WaveletBasis::full(WaveletKind::Daubechies4, 128).unwrap(),
        levels: TrainLevels::default(),
    };
    let failures = (0..10)
        .filter(|&s| superres_trial(&spec, s, &SolverConfig::superres()).unwrap().0.max_signal_error > 0.2)
        .count();
    assert!(failures >= 6, "{failures}/10");
}
