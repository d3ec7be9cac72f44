//! Oracle checks of the numerical kernels against slow reference
//! implementations: naive `O(L^2)` DFT, double-sum convolution, the dense
//! measurement matrix and the dense tangent projector.

use nalgebra::DVector;

use crate::certificate::{ansatz_inverse, default_max_iters, CG_TOL};
use crate::io::VarianceMode;
use crate::lifting::{self, gen_subspaces, CMatrix, FactoredMatrix, GroundTruth, LiftedMatrix, MeasurementSet, SubspaceEnsemble};
use crate::rng::GaussianStream;
use crate::solver::{lagrangian_grad, lagrangian_value, pack, unpack};
use crate::spectral::{circular_convolve, dft};
use crate::superres::{dwt, idwt, WaveletBasis, WaveletKind};
use crate::tangent::{
    coherence_mu_h, coherence_mu_m, embed, project_complement, project_tangent, tangent_normal_apply, TangentElement,
};
use crate::{Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed error.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, worst: f64, tolerance: f64) -> Self {
        Self {
            name,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<24} worst {:.3e} (tol {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

pub fn naive_dft(x: &[C64]) -> Vec<C64> {
    let len = x.len();
    let scale = 1.0 / (len as f64).sqrt();
    (0..len)
        .map(|l| {
            x.iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(scale, -std::f64::consts::TAU * ((l * j) % len) as f64 / len as f64))
                .sum()
        })
        .collect()
}

pub fn naive_convolve(h: &[C64], x: &[C64]) -> Vec<C64> {
    let len = h.len();
    (0..len)
        .map(|l| (0..len).map(|j| h[j] * x[(l + len - j) % len]).sum())
        .collect()
}

/// Dense `LN x (L KN)` matrix of `A` acting on column-major `vec(X)`,
/// built from the real bases and the naive DFT only.
pub fn dense_operator(ens: &SubspaceEnsemble) -> CMatrix {
    let (len, dim, channels) = (ens.len(), ens.dim(), ens.channels());
    let cols = ens.lifted_cols();
    let mut fmat = CMatrix::zeros(len, len);
    for i in 0..len {
        let mut e = vec![C64::new(0.0, 0.0); len];
        e[i] = C64::new(1.0, 0.0);
        fmat.column_mut(i).copy_from_slice(&naive_dft(&e));
    }
    let root = (len as f64).sqrt();
    let mut a = CMatrix::zeros(len * channels, len * cols);
    for n in 0..channels {
        let basis = ens.basis(n).map(|v| C64::new(v, 0.0));
        let chat = &fmat * basis * C64::new(root, 0.0);
        for l in 0..len {
            for k in 0..dim {
                let j = n * dim + k;
                for i in 0..len {
                    a[(l + len * n, i + len * j)] += fmat[(l, i)] * chat[(l, k)];
                }
            }
        }
    }
    a
}

/// Dense `P_T` on column-major `vec(X)`: `I (x) hh* + (mm*)^T (x) I - (mm*)^T (x) hh*`.
pub fn dense_tangent_projector(gt: &GroundTruth) -> CMatrix {
    let h = DVector::from_column_slice(&gt.h);
    let m = DVector::from_column_slice(&gt.m_complex());
    let hh = &h * h.adjoint();
    let mm_t = (&m * m.adjoint()).transpose();
    let (len, cols) = (h.len(), m.len());
    let eye_l = CMatrix::identity(len, len);
    let eye_c = CMatrix::identity(cols, cols);
    eye_c.kronecker(&hh) + mm_t.kronecker(&eye_l) - mm_t.kronecker(&hh)
}

fn vec_of(x: &CMatrix) -> DVector<C64> {
    DVector::from_column_slice(x.as_slice())
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

fn random_lifted(len: usize, cols: usize, s: &mut GaussianStream) -> LiftedMatrix {
    LiftedMatrix(CMatrix::from_fn(len, cols, |_, _| s.complex_normal()))
}

fn random_measurements(len: usize, channels: usize, s: &mut GaussianStream) -> MeasurementSet {
    MeasurementSet(CMatrix::from_fn(len, channels, |_, _| s.complex_normal()))
}

const DIMS: [(usize, usize, usize); 3] = [(2, 8, 3), (3, 16, 2), (1, 12, 4)];

/// `<A X, y> = <X, A* y>` on 100 random pairs per shape, plus the fast
/// forward and adjoint against the dense matrix.
pub fn check_adjoint(seed: u64) -> Result<Check> {
    let mut s = GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    for (i, &(k, l, n)) in DIMS.iter().enumerate() {
        let ens = gen_subspaces(l, k, n, seed ^ i as u64, 1.0 / l as f64)?;
        for _ in 0..100 {
            let x = random_lifted(l, k * n, &mut s);
            let y = random_measurements(l, n, &mut s);
            let ax = lifting::forward(&x, &ens)?;
            let aty = lifting::adjoint(&y, &ens)?;
            let lhs: C64 = y.0.dotc(&ax.0);
            let rhs: C64 = aty.0.dotc(&x.0);
            worst = worst.max(rel((lhs - rhs).norm(), ax.norm() * y.norm()));
        }
        let dense = dense_operator(&ens);
        let x = random_lifted(l, k * n, &mut s);
        let y = random_measurements(l, n, &mut s);
        let fast = vec_of(&lifting::forward(&x, &ens)?.0);
        let slow = &dense * vec_of(&x.0);
        worst = worst.max(rel((&fast - &slow).norm(), slow.norm()));
        let fast = vec_of(&lifting::adjoint(&y, &ens)?.0);
        let slow = dense.adjoint() * vec_of(&y.0);
        worst = worst.max(rel((&fast - &slow).norm(), slow.norm()));
    }
    Ok(Check::new("adjoint identity", worst, 1e-10))
}

/// FFT against the naive DFT, convolution against the double sum, and
/// `F(h * x) = sqrt(L) Fh . Fx`.
pub fn check_convolution(seed: u64) -> Result<Check> {
    let mut s = GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    for len in [1, 2, 5, 8, 12, 64, 128] {
        for _ in 0..10 {
            let h: Vec<C64> = (0..len).map(|_| s.complex_normal()).collect();
            let x: Vec<C64> = (0..len).map(|_| s.complex_normal()).collect();
            let scale = crate::spectral::norm(&h) * crate::spectral::norm(&x);
            let fast = circular_convolve(&h, &x)?;
            let slow = naive_convolve(&h, &x);
            let diff: Vec<C64> = fast.iter().zip(&slow).map(|(a, b)| a - b).collect();
            worst = worst.max(rel(crate::spectral::norm(&diff), scale));

            let lhs = naive_dft(&slow);
            let (hf, xf) = (naive_dft(&h), naive_dft(&x));
            let root = (len as f64).sqrt();
            let diff: Vec<C64> = lhs.iter().zip(hf.iter().zip(&xf)).map(|(a, (b, c))| a - b * c * root).collect();
            worst = worst.max(rel(crate::spectral::norm(&diff), scale));

            let fast = dft(&x)?;
            let diff: Vec<C64> = fast.iter().zip(&xf).map(|(a, b)| a - b).collect();
            worst = worst.max(rel(crate::spectral::norm(&diff), crate::spectral::norm(&x)));
        }
    }
    Ok(Check::new("convolution theorem", worst, 1e-10))
}

/// Dense `P_T` is a Hermitian idempotent, agrees with the factored
/// projection, and splits the norm with its complement.
pub fn check_projector(seed: u64) -> Result<Check> {
    let mut s = GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    for &(k, l, n) in &[(2usize, 6usize, 2usize), (1, 8, 3)] {
        let gt = GroundTruth::gaussian(l, k, n, seed ^ 0x11)?;
        let p = dense_tangent_projector(&gt);
        worst = worst.max((&p * &p - &p).norm());
        worst = worst.max((p.adjoint() - &p).norm());
        for _ in 0..10 {
            let y = random_lifted(l, k * n, &mut s);
            let t = project_tangent(&y, &gt)?;
            let fast = vec_of(&embed(&t, &gt).0);
            let slow = &p * vec_of(&y.0);
            worst = worst.max(rel((&fast - &slow).norm(), y.norm()));
            let comp = project_complement(&y, &gt)?;
            let split = embed(&t, &gt).norm().powi(2) + comp.norm().powi(2);
            worst = worst.max(rel((split - y.norm().powi(2)).abs(), y.norm().powi(2)));
            worst = worst.max(rel((t.norm() - embed(&t, &gt).norm()).abs(), y.norm()));
            let again = project_complement(&comp, &gt)?;
            worst = worst.max(rel((&again.0 - &comp.0).norm(), y.norm()));
        }
    }
    Ok(Check::new("projector", worst, 1e-10))
}

/// Central differences of the augmented Lagrangian in every real
/// coordinate at 20 random points over three shapes.
pub fn check_gradient(seed: u64) -> Result<Check> {
    let mut s = GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    let shapes = [(2usize, 8usize, 2usize, 2usize), (1, 6, 3, 1), (3, 4, 2, 3)];
    for (si, &(k, l, n, r)) in shapes.iter().enumerate() {
        let ens = gen_subspaces(l, k, n, seed ^ (si as u64 + 7), 1.0 / l as f64)?;
        let points = if si == 0 { 8 } else { 6 };
        for _ in 0..points {
            let y = random_measurements(l, n, &mut s);
            let lambda = random_measurements(l, n, &mut s);
            let sigma = 0.5 + 10.0 * s.uniform();
            let x = FactoredMatrix::new(
                CMatrix::from_fn(l, r, |_, _| s.complex_normal()),
                CMatrix::from_fn(k * n, r, |_, _| s.complex_normal()),
            )?;
            let (g1, g2) = lagrangian_grad(&x, &lambda, sigma, &y, &ens)?;
            let analytic = pack(&FactoredMatrix { r1: g1, r2: g2 });
            let v = pack(&x);
            let step = 1e-5;
            let mut fd = vec![0.0; v.len()];
            for i in 0..v.len() {
                let mut plus = v.clone();
                plus[i] += step;
                let mut minus = v.clone();
                minus[i] -= step;
                let fp = lagrangian_value(&unpack(&plus, l, k * n, r), &lambda, sigma, &y, &ens)?;
                let fm = lagrangian_value(&unpack(&minus, l, k * n, r), &lambda, sigma, &y, &ens)?;
                fd[i] = (fp - fm) / (2.0 * step);
            }
            let err: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            worst = worst.max(rel(err, scale));
        }
    }
    Ok(Check::new("gradient", worst, 1e-6))
}

/// Relative residual of the tangent-space solve, recomputed outside CG,
/// and the iteration bound `L + KN + 4`.
pub fn check_cg(seed: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (i, &(k, l, n)) in [(2usize, 32usize, 16usize), (4, 64, 16)].iter().enumerate() {
        let ens = gen_subspaces(l, k, n, seed ^ (0x40 + i as u64), 1.0 / l as f64)?;
        let gt = GroundTruth::gaussian(l, k, n, seed ^ (0x50 + i as u64))?;
        let ans = ansatz_inverse(&gt, &ens, CG_TOL)?;
        let applied = tangent_normal_apply(&ans.f, &ens, &gt)?.gauge_fixed(&gt);
        let rhs = TangentElement {
            a: DVector::from_column_slice(&gt.m_complex()),
            b: DVector::zeros(l),
        };
        let res = TangentElement {
            a: applied.a - &rhs.a,
            b: applied.b - &rhs.b,
        }
        .norm()
            / rhs.norm();
        worst = worst.max(res);
        if ans.cg_iterations > default_max_iters(&ens) {
            worst = f64::INFINITY;
        }
    }
    Ok(Check::new("cg residual", worst, 1e-12))
}

/// `sum_k (I - P_T A*A P_T)^k h m*` against the CG solution on an instance
/// where the tangent deviation is about 0.5.
pub fn check_neumann() -> Result<Check> {
    let seed = crate::rng::derive_seed(1, 0, 0);
    let (l, k, n) = (128, 1, 64);
    let ens = gen_subspaces(l, k, n, crate::rng::derive_seed(seed, 1, 0), VarianceMode::InvLen.variance(l))?;
    let gt = GroundTruth::gaussian(l, k, n, crate::rng::derive_seed(seed, 2, 0))?;
    let rhs = TangentElement {
        a: DVector::from_column_slice(&gt.m_complex()),
        b: DVector::zeros(l),
    };
    let mut term = rhs.clone();
    let mut sum = rhs.clone();
    for _ in 0..80 {
        let applied = tangent_normal_apply(&term, &ens, &gt)?.gauge_fixed(&gt);
        term = TangentElement {
            a: &term.a - applied.a,
            b: &term.b - applied.b,
        };
        sum.a += &term.a;
        sum.b += &term.b;
    }
    let ans = ansatz_inverse(&gt, &ens, CG_TOL)?;
    let diff = TangentElement {
        a: &sum.a - &ans.f.a,
        b: &sum.b - &ans.f.b,
    }
    .norm()
        / ans.f.norm();
    // A divergent series shows up as a large last term.
    let worst = if term.norm() > 1e-8 { f64::INFINITY } else { diff };
    Ok(Check::new("neumann vs cg", worst, 1e-6))
}

pub fn check_wavelets(seed: u64) -> Result<Check> {
    let mut s = GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    for kind in [WaveletKind::Haar, WaveletKind::Daubechies4] {
        for len in [2usize, 8, 64, 256] {
            let full = WaveletBasis::full(kind, len)?;
            for levels in 0..=full.levels {
                let basis = WaveletBasis::new(kind, len, levels)?;
                let x = s.normal_vec(len);
                let back = idwt(&dwt(&x, &basis)?, &basis)?;
                let err = x.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                worst = worst.max(rel(err, scale));
            }
        }
    }
    Ok(Check::new("wavelet roundtrip", worst, 1e-10))
}

/// Coherences against brute force; the closed-form extremes must match
/// exactly.
pub fn check_coherence(seed: u64) -> Result<Check> {
    let mut s = GaussianStream::new(seed);
    let mut worst: f64 = 0.0;
    for len in [4usize, 16, 24, 64] {
        for _ in 0..10 {
            let h: Vec<C64> = (0..len).map(|_| s.complex_normal()).collect();
            let total: f64 = h.iter().map(|z| z.norm_sqr()).sum();
            let peak = naive_dft(&h).iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            let brute = len as f64 * peak / total;
            worst = worst.max(rel((coherence_mu_h(&h)? - brute).abs(), brute));
        }
    }
    for (channels, dim) in [(3usize, 2usize), (8, 4)] {
        for _ in 0..10 {
            let m: Vec<C64> = (0..channels * dim).map(|_| s.complex_normal()).collect();
            let total: f64 = m.iter().map(|z| z.norm_sqr()).sum();
            let peak = (0..channels)
                .map(|b| m[b * dim..(b + 1) * dim].iter().map(|z| z.norm_sqr()).sum::<f64>())
                .fold(0.0, f64::max);
            let brute = channels as f64 * peak / total;
            worst = worst.max(rel((coherence_mu_m(&m, channels, dim)? - brute).abs(), brute));
        }
        let mut one_block = vec![C64::new(0.0, 0.0); channels * dim];
        one_block[dim] = C64::new(2.0, 0.0);
        if coherence_mu_m(&one_block, channels, dim)? != channels as f64 {
            worst = f64::INFINITY;
        }
        if coherence_mu_m(&vec![C64::new(1.0, 0.0); channels * dim], channels, dim)? != 1.0 {
            worst = f64::INFINITY;
        }
    }
    let mut spike = vec![C64::new(0.0, 0.0); 16];
    spike[0] = C64::new(1.0, 0.0);
    if coherence_mu_h(&spike)? != 1.0 {
        worst = f64::INFINITY;
    }
    Ok(Check::new("coherence", worst, 1e-12))
}

/// Every kernel check with the default seed.
pub fn run_all() -> Result<Vec<Check>> {
    let seed = 0x5e1f;
    Ok(vec![
        check_adjoint(seed)?,
        check_convolution(seed)?,
        check_projector(seed)?,
        check_gradient(seed)?,
        check_cg(seed)?,
        check_neumann()?,
        check_wavelets(seed)?,
        check_coherence(seed)?,
    ])
}
