//! Blind super-resolution of signals that are sparse in a wavelet basis.
//!
//! Each signal `x_n` is observed only through a Gaussian ideal low-pass
//! filter. The subspace `C_n` holds the wavelet atoms of the `K` largest
//! coefficients of `x_n`, so `x_n = C_n m_n` exactly, and the lifted solver
//! recovers `h m*` from the in-band measurements.

pub mod wavelet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use wavelet::{dwt, idwt, WaveletBasis, WaveletKind};

use crate::lifting::{GroundTruth, MeasurementSet, SubspaceEnsemble};
use crate::linalg::{random_cvector, CVector};
use crate::rng::{derive_seed, GaussianStream};
use crate::solver::{alm_solve, SolveResult, SolverConfig};
use crate::spectral::{circular_convolve, dft, lowpass_gaussian, to_complex, FilterSpec, LowpassFilter};
use crate::{Error, Result, C64};

/// Detail levels that [`wavelet_train`] draws atoms from: `min` up to
/// `levels - coarse_skip`, level 1 being the finest.
///
/// The default skips the coarsest level, whose periodic atoms wrap around
/// the whole signal, and starts at level 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainLevels {
    pub min: usize,
    pub coarse_skip: usize,
}

impl Default for TrainLevels {
    fn default() -> Self {
        Self { min: 4, coarse_skip: 1 }
    }
}

impl TrainLevels {
    pub fn range(&self, basis: &WaveletBasis) -> std::ops::RangeInclusive<usize> {
        self.min.max(1)..=basis.levels.saturating_sub(self.coarse_skip)
    }
}
/// Power iterations for the rank-one extraction.
pub const EXTRACTION_ITERS: usize = 50;

/// Unit-norm signal with exactly `n_atoms` nonzero wavelet coefficients,
/// placed uniformly among the detail coefficients of the default levels.
pub fn wavelet_train(len: usize, n_atoms: usize, seed: u64, basis: &WaveletBasis) -> Result<Vec<f64>> {
    wavelet_train_levels(len, n_atoms, seed, basis, TrainLevels::default())
}

pub fn wavelet_train_levels(
    len: usize,
    n_atoms: usize,
    seed: u64,
    basis: &WaveletBasis,
    levels: TrainLevels,
) -> Result<Vec<f64>> {
    if len != basis.len {
        return Err(Error::LengthMismatch {
            expected: basis.len,
            actual: len,
        });
    }
    if n_atoms == 0 {
        return Err(Error::InvalidParameter("a wavelet train needs at least one atom".into()));
    }
    let candidates: Vec<usize> = levels
        .range(basis)
        .flat_map(|level| basis.detail_range(level))
        .collect();
    if n_atoms > candidates.len() {
        return Err(Error::InvalidParameter(format!(
            "{n_atoms} atoms requested but only {} coefficients at levels {:?}",
            candidates.len(),
            levels.range(basis)
        )));
    }
    let mut stream = GaussianStream::new(seed);
    let mut coeffs = vec![0.0; len];
    for pick in stream.choose_distinct(candidates.len(), n_atoms) {
        // Magnitudes in [0.5, 1.5) keep every atom visible.
        let magnitude = 0.5 + stream.uniform();
        let sign = if stream.uniform() < 0.5 { -1.0 } else { 1.0 };
        coeffs[candidates[pick]] = sign * magnitude;
    }
    let total = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
    coeffs.iter_mut().for_each(|v| *v /= total);
    idwt(&coeffs, basis)
}

/// Atoms of the `k` largest `|dwt(x)|` coefficients as the columns of an
/// `L x K` matrix, ranked by magnitude with ties going to the lower index.
pub fn top_k_subspace(x: &[f64], k: usize, basis: &WaveletBasis) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if k == 0 || k > x.len() {
        return Err(Error::InvalidParameter(format!("K = {k} must lie in 1..={}", x.len())));
    }
    let c = dwt(x, basis)?;
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&i, &j| c[j].abs().total_cmp(&c[i].abs()).then(i.cmp(&j)));
    order.truncate(k);
    let mut out = DMatrix::zeros(x.len(), k);
    for (col, &idx) in order.iter().enumerate() {
        out.column_mut(col).copy_from_slice(&basis.atom(idx)?);
    }
    Ok((out, order))
}

/// Observed data for one super-resolution problem.
#[derive(Clone, Debug)]
pub struct SuperresInstance {
    pub basis: WaveletBasis,
    pub filter: LowpassFilter,
    pub signals: Vec<Vec<f64>>,
    pub ensemble: SubspaceEnsemble,
    /// Wavelet coefficients of each signal in its own subspace.
    pub truth: GroundTruth,
    /// Time-domain low-pass observations `h * x_n`.
    pub observations: Vec<Vec<f64>>,
    /// `sqrt(L) h_hat . x_hat_n` from the exact filter spectrum.
    pub measurements: MeasurementSet,
}

pub fn build_instance(signals: &[Vec<f64>], filter: FilterSpec, k: usize, basis: &WaveletBasis) -> Result<SuperresInstance> {
    if signals.is_empty() {
        return Err(Error::EmptyInput);
    }
    if filter.len != basis.len {
        return Err(Error::LengthMismatch {
            expected: basis.len,
            actual: filter.len,
        });
    }
    let filter = lowpass_gaussian(filter)?;
    let len = basis.len;
    let root = (len as f64).sqrt();
    let mut bases = Vec::with_capacity(signals.len());
    let mut coeffs = Vec::with_capacity(signals.len() * k);
    let mut observations = Vec::with_capacity(signals.len());
    let mut measurements = MeasurementSet::zeros(len, signals.len());
    for (n, x) in signals.iter().enumerate() {
        let (c, _) = top_k_subspace(x, k, basis)?;
        coeffs.extend((c.transpose() * DVector::from_column_slice(x)).iter());
        bases.push(c);
        let xc = to_complex(x);
        observations.push(circular_convolve(&filter.time, &xc)?.iter().map(|z| z.re).collect());
        let xhat = dft(&xc)?;
        for l in 0..len {
            measurements.0[(l, n)] = filter.spectrum[l] * xhat[l] * root;
        }
    }
    Ok(SuperresInstance {
        basis: *basis,
        ensemble: SubspaceEnsemble::from_bases(bases)?,
        truth: GroundTruth::new(filter.time.clone(), coeffs, k)?,
        filter,
        signals: signals.to_vec(),
        observations,
        measurements,
    })
}

#[derive(Clone, Debug)]
pub struct SuperresResult {
    /// Recovered filter, aligned with the true one on the observable bins.
    pub filter: Vec<C64>,
    pub filter_spectrum: Vec<C64>,
    /// Real parts of the recovered signals.
    pub signals: Vec<Vec<f64>>,
    pub signal_errors: Vec<f64>,
    /// Relative error of the filter spectrum on the observable bins.
    pub filter_error: f64,
    /// Best-scaled low-pass observation against each true signal.
    pub baseline_errors: Vec<f64>,
    pub solve: SolveResult,
}

impl SuperresResult {
    pub fn max_signal_error(&self) -> f64 {
        self.signal_errors.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperresSummary {
    pub seed: u64,
    pub max_signal_error: f64,
    pub filter_error: f64,
    pub max_baseline_error: f64,
    pub min_baseline_error: f64,
    pub converged: bool,
}

fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Leading left singular vector of `R1 R2*` by power iteration on `X X*`.
fn leading_left_vector(solve: &SolveResult, seed: u64) -> CVector {
    let (r1, r2) = (&solve.factors.r1, &solve.factors.r2);
    let gram = r2.adjoint() * r2;
    let mut u = random_cvector(r1.nrows(), seed);
    for _ in 0..EXTRACTION_ITERS {
        let next = r1 * (&gram * (r1.adjoint() * &u));
        let n = next.norm();
        if n == 0.0 {
            break;
        }
        u = next / C64::new(n, 0.0);
    }
    u
}

/// Bins carrying any measurement energy. Inside the pass band these exclude
/// frequencies where every `x_hat_n` vanishes, such as DC for zero-mean
/// detail atoms; the filter is unobservable there.
pub fn observable_bins(inst: &SuperresInstance) -> Vec<usize> {
    let peak = inst.measurements.0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (0..inst.basis.len)
        .filter(|&l| inst.measurements.0.row(l).iter().any(|z| z.norm() > OBSERVABLE_TOL * peak))
        .collect()
}

/// Relative threshold below which a measurement row counts as empty.
pub const OBSERVABLE_TOL: f64 = 1e-12;

/// Solve a prepared instance and score it against the known truth.
///
/// `X = h m*` fixes `h` only up to a complex scale, and only on observable
/// bins. The recovered filter is scaled and rotated so that its observable
/// spectrum has the norm of the true one and a real positive overlap with
/// it; `m = X* h / ||h||^2` then follows.
pub fn solve_instance(inst: &SuperresInstance, config: &SolverConfig) -> Result<SuperresResult> {
    let scale = inst.measurements.norm();
    if scale == 0.0 {
        return Err(Error::ZeroVector);
    }
    let y = MeasurementSet(&inst.measurements.0 / C64::new(scale, 0.0));
    let solve = alm_solve(&y, &inst.ensemble, config, None)?;
    let len = inst.basis.len;
    let dim = inst.ensemble.dim();

    let observable = observable_bins(inst);
    let leading = leading_left_vector(&solve, config.seed ^ 0x51);
    let spectrum = dft(leading.as_slice())?;
    let rec_obs: Vec<C64> = observable.iter().map(|&b| spectrum[b]).collect();
    let true_obs: Vec<C64> = observable.iter().map(|&b| inst.filter.spectrum[b]).collect();
    let overlap: C64 = rec_obs.iter().zip(&true_obs).map(|(r, t)| r.conj() * t).sum();
    let rec_norm = crate::spectral::norm(&rec_obs);
    let factor = if overlap.norm() > 0.0 && rec_norm > 0.0 {
        overlap / overlap.norm() * (crate::spectral::norm(&true_obs) / rec_norm)
    } else {
        C64::new(1.0, 0.0)
    };
    let h = leading * factor;
    // m = X* h / ||h||^2, undoing the measurement normalization.
    let m = &solve.factors.r2 * (solve.factors.r1.adjoint() * &h) * C64::new(scale / h.norm_squared(), 0.0);

    let mut signals = Vec::new();
    let mut signal_errors = Vec::new();
    let mut baseline_errors = Vec::new();
    for (n, x) in inst.signals.iter().enumerate() {
        let basis = inst.ensemble.basis(n);
        let rec: Vec<C64> = (0..len)
            .map(|i| (0..dim).map(|k| basis[(i, k)] * m[n * dim + k]).sum())
            .collect();
        let xc = to_complex(x);
        signal_errors.push(rel_diff(&rec, &xc));
        signals.push(rec.iter().map(|z| z.re).collect());
        let obs = &inst.observations[n];
        let alpha = obs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / obs.iter().map(|a| a * a).sum::<f64>();
        let scaled: Vec<C64> = obs.iter().map(|v| C64::new(alpha * v, 0.0)).collect();
        baseline_errors.push(rel_diff(&scaled, &xc));
    }

    let filter: Vec<C64> = h.iter().copied().collect();
    let filter_spectrum = dft(&filter)?;
    let rec_obs: Vec<C64> = observable.iter().map(|&b| filter_spectrum[b]).collect();
    Ok(SuperresResult {
        filter,
        filter_spectrum,
        signals,
        signal_errors,
        filter_error: rel_diff(&rec_obs, &true_obs),
        baseline_errors,
        solve,
    })
}

pub fn superres_pipeline(
    signals: &[Vec<f64>],
    filter: FilterSpec,
    k: usize,
    basis: &WaveletBasis,
    config: &SolverConfig,
) -> Result<SuperresResult> {
    solve_instance(&build_instance(signals, filter, k, basis)?, config)
}

/// `n_signals` independent `n_atoms`-atom trains with seeds derived from `seed`.
pub fn random_trains(
    n_signals: usize,
    n_atoms: usize,
    seed: u64,
    basis: &WaveletBasis,
    levels: TrainLevels,
) -> Result<Vec<Vec<f64>>> {
    (0..n_signals)
        .map(|n| wavelet_train_levels(basis.len, n_atoms, derive_seed(seed, n as u64, 0x7261), basis, levels))
        .collect()
}

/// Problem shape for seeded super-resolution trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSpec {
    pub channels: usize,
    pub dim: usize,
    pub filter: FilterSpec,
    pub basis: WaveletBasis,
    pub levels: TrainLevels,
}

/// One seeded trial: `N` random `K`-atom trains through the filter.
pub fn superres_trial(spec: &TrialSpec, seed: u64, config: &SolverConfig) -> Result<(SuperresSummary, SuperresResult)> {
    let signals = random_trains(spec.channels, spec.dim, seed, &spec.basis, spec.levels)?;
    let cfg = SolverConfig {
        seed: derive_seed(seed, 0, 0x5e),
        ..*config
    };
    let res = superres_pipeline(&signals, spec.filter, spec.dim, &spec.basis, &cfg)?;
    let summary = SuperresSummary {
        seed,
        max_signal_error: res.max_signal_error(),
        filter_error: res.filter_error,
        max_baseline_error: res.baseline_errors.iter().copied().fold(0.0, f64::max),
        min_baseline_error: res.baseline_errors.iter().copied().fold(f64::INFINITY, f64::min),
        converged: res.solve.converged,
    };
    Ok((summary, res))
}
