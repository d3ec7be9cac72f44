//! Property tests for the kernel invariants.

mod common;

use common::c;
use liftdeconv::io::{fmt_float, format_key_values, parse_key_values, read_matrix, write_matrix};
use liftdeconv::lifting::{
    adjoint, forward, gen_subspaces, synthesize, CMatrix, FactoredMatrix, GroundTruth, LiftedMatrix, MeasurementSet,
};
use liftdeconv::rng::{derive_seed, GaussianStream};
use liftdeconv::solver::lagrangian_grad;
use liftdeconv::spectral::{circular_convolve, dft, idft, lowpass_gaussian, norm, FilterSpec};
use liftdeconv::superres::{build_instance, dwt, idwt, wavelet_train, WaveletBasis, WaveletKind};
use liftdeconv::tangent::{
    coherence_mu_h, coherence_mu_m, embed, project_complement, project_tangent, tangent_normal_apply, TangentElement,
};
use liftdeconv::C64;
use nalgebra::DVector;
use proptest::prelude::*;

fn cvec(len: usize, seed: u64) -> Vec<C64> {
    let mut s = GaussianStream::new(seed);
    (0..len).map(|_| s.complex_normal()).collect()
}

fn cmat(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut s = GaussianStream::new(seed);
    CMatrix::from_fn(rows, cols, |_, _| s.complex_normal())
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..4, 2usize..20, 1usize..5)
}

fn tangent(len: usize, cols: usize, seed: u64, gt: &GroundTruth) -> TangentElement {
    TangentElement {
        a: DVector::from_vec(cvec(cols, seed)),
        b: DVector::from_vec(cvec(len, seed ^ 1)),
    }
    .gauge_fixed(gt)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dft_is_unitary(len in 1usize..70, seed in any::<u64>()) {
        let x = cvec(len, seed);
        let fx = dft(&x).unwrap();
        prop_assert!((norm(&fx) - norm(&x)).abs() <= 1e-12 * norm(&x));
        let back = idft(&fx).unwrap();
        prop_assert!(common::max_abs(&back, &x) <= 1e-12 * norm(&x));
    }

    #[test]
    fn convolution_theorem(len in 1usize..70, seed in any::<u64>()) {
        let h = cvec(len, seed);
        let x = cvec(len, seed ^ 7);
        let lhs = dft(&circular_convolve(&h, &x).unwrap()).unwrap();
        let (hf, xf) = (dft(&h).unwrap(), dft(&x).unwrap());
        let root = (len as f64).sqrt();
        let rhs: Vec<C64> = hf.iter().zip(&xf).map(|(a, b)| a * b * root).collect();
        prop_assert!(common::max_abs(&lhs, &rhs) < 1e-10 * norm(&h) * norm(&x));
    }

    #[test]
    fn lowpass_out_of_band_exact_zero(len in 2usize..200, width in 0.1f64..50.0, frac in 0.0f64..1.0) {
        let cutoff = ((len / 2) as f64 * frac) as usize;
        let filt = lowpass_gaussian(FilterSpec::new(len, width, cutoff).unwrap()).unwrap();
        for bin in 0..len {
            if bin.min(len - bin) > cutoff {
                prop_assert_eq!(filt.spectrum[bin], c(0.0));
            }
        }
        prop_assert!((norm(&filt.time) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjointness((k, l, n) in dims(), seed in any::<u64>()) {
        let ens = gen_subspaces(l, k, n, seed, 1.0 / l as f64).unwrap();
        let x = LiftedMatrix(cmat(l, k * n, seed ^ 2));
        let y = MeasurementSet(cmat(l, n, seed ^ 3));
        let ax = forward(&x, &ens).unwrap();
        let aty = adjoint(&y, &ens).unwrap();
        let lhs = y.0.dotc(&ax.0);
        let rhs = aty.0.dotc(&x.0);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * ax.norm() * y.norm());
    }

    #[test]
    fn model_consistency((k, l, n) in dims(), seed in any::<u64>()) {
        let ens = gen_subspaces(l, k, n, seed, 1.0 / l as f64).unwrap();
        let gt = GroundTruth::gaussian(l, k, n, seed ^ 5).unwrap();
        let direct = synthesize(&gt, &ens).unwrap();
        let lifted = forward(&gt.lifted(), &ens).unwrap();
        prop_assert!((&direct.0 - &lifted.0).norm() < 1e-10 * direct.norm().max(1.0));
    }

    #[test]
    fn factored_path_matches_dense((k, l, n) in dims(), rank in 1usize..4, seed in any::<u64>()) {
        let ens = gen_subspaces(l, k, n, seed, 1.0 / l as f64).unwrap();
        let x = FactoredMatrix::new(cmat(l, rank, seed ^ 9), cmat(k * n, rank, seed ^ 10)).unwrap();
        let fast = forward(&x, &ens).unwrap();
        let slow = forward(&x.materialize(), &ens).unwrap();
        prop_assert!((fast.0 - &slow.0).norm() < 1e-10 * slow.norm().max(1.0));
    }

    #[test]
    fn tangent_projections((k, l, n) in dims(), seed in any::<u64>()) {
        let gt = GroundTruth::gaussian(l, k, n, seed).unwrap();
        let t = tangent(l, k * n, seed ^ 11, &gt);
        let back = project_tangent(&embed(&t, &gt), &gt).unwrap();
        prop_assert!((&back.a - &t.a).norm() < 1e-10 * t.norm().max(1.0));
        prop_assert!((&back.b - &t.b).norm() < 1e-10 * t.norm().max(1.0));

        let y = LiftedMatrix(cmat(l, k * n, seed ^ 12));
        let comp = project_complement(&y, &gt).unwrap();
        let again = project_complement(&comp, &gt).unwrap();
        prop_assert!((&again.0 - &comp.0).norm() < 1e-10 * y.norm());
        let sum = embed(&project_tangent(&y, &gt).unwrap(), &gt).0 + &comp.0;
        prop_assert!((sum - &y.0).norm() < 1e-10 * y.norm());
    }

    #[test]
    fn coherence_bounds((k, l, n) in dims(), seed in any::<u64>()) {
        let gt = GroundTruth::gaussian(l, k, n, seed).unwrap();
        let mu_m = coherence_mu_m(&gt.m_complex(), n, k).unwrap();
        let mu_h = coherence_mu_h(&gt.h).unwrap();
        prop_assert!((1.0 - 1e-12..=n as f64 + 1e-12).contains(&mu_m));
        prop_assert!((1.0 - 1e-12..=l as f64 + 1e-12).contains(&mu_h));
    }

    #[test]
    fn tangent_normal_is_self_adjoint_psd((k, l, n) in dims(), seed in any::<u64>()) {
        let ens = gen_subspaces(l, k, n, seed, 1.0 / l as f64).unwrap();
        let gt = GroundTruth::gaussian(l, k, n, seed ^ 13).unwrap();
        let t1 = tangent(l, k * n, seed ^ 14, &gt);
        let t2 = tangent(l, k * n, seed ^ 15, &gt);
        let n1 = tangent_normal_apply(&t1, &ens, &gt).unwrap();
        let n2 = tangent_normal_apply(&t2, &ens, &gt).unwrap();
        let (e1, e2) = (embed(&t1, &gt), embed(&t2, &gt));
        let (f1, f2) = (embed(&n1, &gt), embed(&n2, &gt));
        let scale = f1.norm() * e2.norm() + f2.norm() * e1.norm();
        prop_assert!((e1.inner(&f2) - f1.inner(&e2)).norm() <= 1e-10 * scale.max(1e-300));
        // the coordinate pairing agrees in its real part
        prop_assert!((t1.inner(&n2).re - e1.inner(&f2).re).abs() <= 1e-10 * scale.max(1e-300));
        let q = e1.inner(&f1);
        prop_assert!(q.re >= -1e-12 * f1.norm() * e1.norm());
        prop_assert!(q.im.abs() <= 1e-10 * f1.norm() * e1.norm());
    }

    #[test]
    fn multiplier_gradient_is_affine((k, l, n) in dims(), seed in any::<u64>()) {
        let ens = gen_subspaces(l, k, n, seed, 1.0 / l as f64).unwrap();
        let x = FactoredMatrix::new(cmat(l, 2, seed ^ 16), cmat(k * n, 2, seed ^ 17)).unwrap();
        let y = MeasurementSet(cmat(l, n, seed ^ 18));
        let lam = cmat(l, n, seed ^ 19);
        let g = |scale: f64| lagrangian_grad(&x, &MeasurementSet(&lam * c(scale)), 2.0, &y, &ens).unwrap();
        let (g0, g1, g2) = (g(0.0), g(1.0), g(2.0));
        let d1 = (&g2.0 - &g1.0) - (&g1.0 - &g0.0);
        let d2 = (&g2.1 - &g1.1) - (&g1.1 - &g0.1);
        let scale = g1.0.norm() + g1.1.norm();
        prop_assert!(d1.norm() + d2.norm() < 1e-10 * scale.max(1.0));
    }

    #[test]
    fn wavelet_roundtrip(db4 in any::<bool>(), log_len in 1u32..9, level_frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let kind = if db4 { WaveletKind::Daubechies4 } else { WaveletKind::Haar };
        let len = 1usize << log_len;
        let levels = (log_len as f64 * level_frac).round() as usize;
        let basis = WaveletBasis::new(kind, len, levels).unwrap();
        let x = GaussianStream::new(seed).normal_vec(len);
        let coeffs = dwt(&x, &basis).unwrap();
        let back = idwt(&coeffs, &basis).unwrap();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nc = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((nx - nc).abs() < 1e-10 * nx);
        prop_assert!(x.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-10 * nx));
    }

    #[test]
    fn superres_signals_live_in_their_subspaces(seed in any::<u64>(), db4 in any::<bool>()) {
        let kind = if db4 { WaveletKind::Daubechies4 } else { WaveletKind::Haar };
        let basis = WaveletBasis::full(kind, 128).unwrap();
        let signals: Vec<Vec<f64>> = (0..3).map(|i| wavelet_train(128, 4, derive_seed(seed, i, 0), &basis).unwrap()).collect();
        let inst = build_instance(&signals, FilterSpec::new(128, 8.0, 16).unwrap(), 4, &basis).unwrap();
        for (n, x) in signals.iter().enumerate() {
            let rebuilt = inst.truth.signal(&inst.ensemble, n);
            prop_assert!(x.iter().zip(&rebuilt).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn matrix_file_roundtrip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
        let m = cmat(rows, cols, seed);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        prop_assert_eq!(read_matrix(&buf[..]).unwrap(), m);
    }

    #[test]
    fn floats_print_losslessly(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn key_values_roundtrip(map in proptest::collection::btree_map("[a-zA-Z_][a-zA-Z0-9_-]{0,8}", "[a-zA-Z0-9./-]{0,8}", 0..6)) {
        prop_assert_eq!(parse_key_values(&format_key_values(&map)).unwrap(), map);
    }
}
