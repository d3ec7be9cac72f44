//! Random subspace ensembles and the lifted measurement operator.
//!
//! Channel `n` observes `y_n = h * x_n` with `x_n = C_n m_n`. In the Fourier
//! domain, with `c_hat[l, k] = sqrt(L) (F C_n)[l, k]`,
//!
//! ```text
//! y_hat_n[l] = sqrt(L) h_hat[l] x_hat_n[l] = h_hat[l] * sum_k c_hat_n[l, k] m_n[k]
//! ```
//!
//! which is linear in the lifted matrix `X = h m*`:
//! `A(X)[l, n] = sum_k (F X)[l, nK + k] c_hat_n[l, k]`.
//! The convention is pinned by `A(h m*) == synthesize(h, m)` for real `m`.

use nalgebra::DMatrix;

use crate::rng::GaussianStream;
use crate::spectral::{circular_convolve, to_complex, DftPlan};
use crate::{Error, Result, C64};

pub type CMatrix = DMatrix<C64>;

/// How the bases of an ensemble were obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnsembleOrigin {
    /// i.i.d. `N(0, variance)` entries from a seeded stream.
    Gaussian { seed: u64, variance: f64 },
    /// Caller-supplied bases (e.g. wavelet atoms).
    Explicit,
}

/// The `N` bases `C_n` (each `L x K`, real) together with the cached
/// scaled Fourier transforms `sqrt(L) F C_n`.
#[derive(Clone, Debug)]
pub struct SubspaceEnsemble {
    len: usize,
    dim: usize,
    channels: usize,
    origin: EnsembleOrigin,
    bases: Vec<DMatrix<f64>>,
    scaled_fourier: Vec<CMatrix>,
    plan: DftPlan,
}

impl SubspaceEnsemble {
    /// Draw `N` Gaussian bases of shape `L x K` with the given per-entry variance.
    pub fn gaussian(len: usize, dim: usize, channels: usize, seed: u64, variance: f64) -> Result<Self> {
        check_dims(len, dim, channels)?;
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!("variance must be positive, got {variance}")));
        }
        let std_dev = variance.sqrt();
        let mut stream = GaussianStream::new(seed);
        let bases = (0..channels)
            .map(|_| DMatrix::from_fn(len, dim, |_, _| stream.normal(std_dev)))
            .collect();
        Self::build(bases, EnsembleOrigin::Gaussian { seed, variance })
    }

    /// Wrap explicit bases; all must share the same `L x K` shape.
    pub fn from_bases(bases: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = bases
            .first()
            .ok_or_else(|| Error::InvalidDimension("ensemble needs at least one channel".into()))?;
        let (len, dim) = first.shape();
        check_dims(len, dim, bases.len())?;
        for b in &bases {
            if b.shape() != (len, dim) {
                return Err(Error::ShapeMismatch {
                    expected_rows: len,
                    expected_cols: dim,
                    rows: b.nrows(),
                    cols: b.ncols(),
                });
            }
        }
        Self::build(bases, EnsembleOrigin::Explicit)
    }

    fn build(bases: Vec<DMatrix<f64>>, origin: EnsembleOrigin) -> Result<Self> {
        let (len, dim) = bases[0].shape();
        let plan = DftPlan::new(len)?;
        let root = (len as f64).sqrt();
        let scaled_fourier = bases
            .iter()
            .map(|basis| {
                let mut out = CMatrix::zeros(len, dim);
                for k in 0..dim {
                    let mut col: Vec<C64> = basis.column(k).iter().map(|&v| C64::new(v, 0.0)).collect();
                    plan.forward(&mut col);
                    for (l, z) in col.into_iter().enumerate() {
                        out[(l, k)] = z * root;
                    }
                }
                out
            })
            .collect();
        Ok(Self {
            len,
            dim,
            channels: bases.len(),
            origin,
            bases,
            scaled_fourier,
            plan,
        })
    }

    /// Signal length `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Subspace dimension `K`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of channels `N`.
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Width `K N` of the lifted matrix.
    pub fn lifted_cols(&self) -> usize {
        self.dim * self.channels
    }

    pub fn origin(&self) -> EnsembleOrigin {
        self.origin
    }

    pub fn basis(&self, channel: usize) -> &DMatrix<f64> {
        &self.bases[channel]
    }

    /// `sqrt(L) F C_n`.
    pub fn scaled_fourier(&self, channel: usize) -> &CMatrix {
        &self.scaled_fourier[channel]
    }

    pub fn plan(&self) -> &DftPlan {
        &self.plan
    }

    /// Same ensemble with every basis multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let bases = self.bases.iter().map(|b| b * factor).collect();
        let origin = match self.origin {
            EnsembleOrigin::Gaussian { seed, variance } => EnsembleOrigin::Gaussian {
                seed,
                variance: variance * factor * factor,
            },
            EnsembleOrigin::Explicit => EnsembleOrigin::Explicit,
        };
        Self::build(bases, origin)
    }

    /// The lifted row vector `c_hat_{l,n}` of length `KN`: zero outside block
    /// `n`, row `l` of `sqrt(L) F C_n` inside it.
    pub fn chat(&self, bin: usize, channel: usize) -> Result<Vec<C64>> {
        if bin >= self.len {
            return Err(Error::IndexOutOfRange { index: bin, len: self.len });
        }
        if channel >= self.channels {
            return Err(Error::IndexOutOfRange {
                index: channel,
                len: self.channels,
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); self.lifted_cols()];
        let block = &self.scaled_fourier[channel];
        for k in 0..self.dim {
            out[channel * self.dim + k] = block[(bin, k)];
        }
        Ok(out)
    }

    fn check_lifted(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != self.len || cols != self.lifted_cols() {
            return Err(Error::ShapeMismatch {
                expected_rows: self.len,
                expected_cols: self.lifted_cols(),
                rows,
                cols,
            });
        }
        Ok(())
    }

    fn check_measurements(&self, y: &MeasurementSet) -> Result<()> {
        let (rows, cols) = y.0.shape();
        if rows != self.len || cols != self.channels {
            return Err(Error::ShapeMismatch {
                expected_rows: self.len,
                expected_cols: self.channels,
                rows,
                cols,
            });
        }
        Ok(())
    }
}

fn check_dims(len: usize, dim: usize, channels: usize) -> Result<()> {
    if len == 0 || dim == 0 || channels == 0 {
        return Err(Error::InvalidDimension(format!(
            "L, K, N must be positive (got L={len}, K={dim}, N={channels})"
        )));
    }
    Ok(())
}

/// Shorthand for [`SubspaceEnsemble::gaussian`].
pub fn gen_subspaces(len: usize, dim: usize, channels: usize, seed: u64, variance: f64) -> Result<SubspaceEnsemble> {
    SubspaceEnsemble::gaussian(len, dim, channels, seed, variance)
}

/// Unknown filter `h` and concatenated real coefficients `m = [m_1; ...; m_N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub h: Vec<C64>,
    pub m: Vec<f64>,
    dim: usize,
}

impl GroundTruth {
    pub fn new(h: Vec<C64>, m: Vec<f64>, dim: usize) -> Result<Self> {
        if h.is_empty() || m.is_empty() || dim == 0 {
            return Err(Error::EmptyInput);
        }
        if !m.len().is_multiple_of(dim) {
            return Err(Error::InvalidDimension(format!(
                "coefficient length {} is not a multiple of K = {dim}",
                m.len()
            )));
        }
        Ok(Self { h, m, dim })
    }

    /// Gaussian `h` and `m`, each normalized to unit norm.
    pub fn gaussian(len: usize, dim: usize, channels: usize, seed: u64) -> Result<Self> {
        check_dims(len, dim, channels)?;
        let mut stream = GaussianStream::new(seed);
        let h = stream.normal_vec(len);
        let m = stream.normal_vec(dim * channels);
        Self::new(to_complex(&h), m, dim).map(Self::normalized)
    }

    /// `S`-sparse Gaussian `h` on a uniformly random support, Gaussian `m`,
    /// both normalized.
    pub fn sparse_gaussian(len: usize, dim: usize, channels: usize, sparsity: usize, seed: u64) -> Result<Self> {
        check_dims(len, dim, channels)?;
        if sparsity == 0 || sparsity > len {
            return Err(Error::InvalidParameter(format!("sparsity {sparsity} must lie in 1..={len}")));
        }
        let mut stream = GaussianStream::new(seed);
        let mut h = vec![0.0; len];
        for idx in stream.choose_distinct(len, sparsity) {
            h[idx] = stream.standard_normal();
        }
        let m = stream.normal_vec(dim * channels);
        Self::new(to_complex(&h), m, dim).map(Self::normalized)
    }

    pub fn normalized(mut self) -> Self {
        let hn = crate::spectral::norm(&self.h);
        if hn > 0.0 {
            self.h.iter_mut().for_each(|z| *z /= hn);
        }
        let mn = self.m.iter().map(|v| v * v).sum::<f64>().sqrt();
        if mn > 0.0 {
            self.m.iter_mut().for_each(|v| *v /= mn);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> usize {
        self.m.len() / self.dim
    }

    pub fn block(&self, channel: usize) -> &[f64] {
        &self.m[channel * self.dim..(channel + 1) * self.dim]
    }

    pub fn m_complex(&self) -> Vec<C64> {
        to_complex(&self.m)
    }

    /// `X0 = h m*`.
    pub fn lifted(&self) -> LiftedMatrix {
        LiftedMatrix(CMatrix::from_fn(self.h.len(), self.m.len(), |i, j| self.h[i] * self.m[j]))
    }

    /// Time-domain input `x_n = C_n m_n`.
    pub fn signal(&self, ens: &SubspaceEnsemble, channel: usize) -> Vec<f64> {
        let block = nalgebra::DVector::from_column_slice(self.block(channel));
        (ens.basis(channel) * block).iter().copied().collect()
    }

    fn check_against(&self, ens: &SubspaceEnsemble) -> Result<()> {
        if self.h.len() != ens.len() {
            return Err(Error::LengthMismatch {
                expected: ens.len(),
                actual: self.h.len(),
            });
        }
        if self.m.len() != ens.lifted_cols() || self.dim != ens.dim() {
            return Err(Error::LengthMismatch {
                expected: ens.lifted_cols(),
                actual: self.m.len(),
            });
        }
        Ok(())
    }
}

/// Fourier-domain measurements `y_hat[l, n]`, shape `L x N`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet(pub CMatrix);

impl MeasurementSet {
    pub fn zeros(len: usize, channels: usize) -> Self {
        Self(CMatrix::zeros(len, channels))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Dense `L x KN` lifted matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedMatrix(pub CMatrix);

impl LiftedMatrix {
    pub fn zeros(len: usize, cols: usize) -> Self {
        Self(CMatrix::zeros(len, cols))
    }

    /// Frobenius inner product `<self, other> = tr(self* other)`.
    pub fn inner(&self, other: &LiftedMatrix) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Burer-Monteiro factors representing `X = R1 R2*`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredMatrix {
    /// `L x r`
    pub r1: CMatrix,
    /// `KN x r`
    pub r2: CMatrix,
}

impl FactoredMatrix {
    pub fn new(r1: CMatrix, r2: CMatrix) -> Result<Self> {
        if r1.ncols() != r2.ncols() || r1.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "factor ranks must agree and be positive ({} vs {})",
                r1.ncols(),
                r2.ncols()
            )));
        }
        Ok(Self { r1, r2 })
    }

    pub fn rank(&self) -> usize {
        self.r1.ncols()
    }

    pub fn materialize(&self) -> LiftedMatrix {
        LiftedMatrix(&self.r1 * self.r2.adjoint())
    }
}

/// Anything the lifted operator can be applied to.
pub trait Measurable {
    fn measure(&self, ens: &SubspaceEnsemble) -> Result<MeasurementSet>;
}

impl Measurable for LiftedMatrix {
    fn measure(&self, ens: &SubspaceEnsemble) -> Result<MeasurementSet> {
        let x = &self.0;
        ens.check_lifted(x.nrows(), x.ncols())?;
        let (len, dim) = (ens.len(), ens.dim());
        let mut out = MeasurementSet::zeros(len, ens.channels());
        let mut col = vec![C64::new(0.0, 0.0); len];
        for j in 0..x.ncols() {
            let (channel, k) = (j / dim, j % dim);
            col.copy_from_slice(x.column(j).as_slice());
            ens.plan().forward(&mut col);
            let fourier = ens.scaled_fourier(channel);
            for l in 0..len {
                out.0[(l, channel)] += col[l] * fourier[(l, k)];
            }
        }
        Ok(out)
    }
}

impl Measurable for FactoredMatrix {
    /// Never forms `R1 R2*`: `A(X)[l, n] = sum_s (F R1)[l, s] (c_hat_n conj(R2_n))[l, s]`.
    fn measure(&self, ens: &SubspaceEnsemble) -> Result<MeasurementSet> {
        let projected = FactorTransforms::new(self, ens)?;
        Ok(projected.measurements())
    }
}

/// `A(X)` for a dense or factored `X`.
pub fn forward<X: Measurable + ?Sized>(x: &X, ens: &SubspaceEnsemble) -> Result<MeasurementSet> {
    x.measure(ens)
}

/// Intermediate transforms of a factor pair shared by the measurement and
/// the gradient computations: `P = F R1` (`L x r`) and, per channel,
/// `Q_n = c_hat_n conj(R2_n)` (`L x r`).
pub(crate) struct FactorTransforms {
    pub p: CMatrix,
    pub q: Vec<CMatrix>,
}

impl FactorTransforms {
    pub fn new(x: &FactoredMatrix, ens: &SubspaceEnsemble) -> Result<Self> {
        let rank = x.rank();
        ens.check_lifted(x.r1.nrows(), x.r2.nrows())?;
        let (len, dim) = (ens.len(), ens.dim());
        let mut p = x.r1.clone();
        for s in 0..rank {
            ens.plan().forward(p.column_mut(s).as_mut_slice());
        }
        let q = (0..ens.channels())
            .map(|channel| {
                let fourier = ens.scaled_fourier(channel);
                let mut qn = CMatrix::zeros(len, rank);
                for s in 0..rank {
                    let mut qcol = qn.column_mut(s);
                    for k in 0..dim {
                        let coef = x.r2[(channel * dim + k, s)].conj();
                        qcol.axpy(coef, &fourier.column(k), C64::new(1.0, 0.0));
                    }
                }
                qn
            })
            .collect();
        Ok(Self { p, q })
    }

    pub fn measurements(&self) -> MeasurementSet {
        let (len, rank) = self.p.shape();
        let mut out = MeasurementSet::zeros(len, self.q.len());
        for (channel, qn) in self.q.iter().enumerate() {
            for s in 0..rank {
                for l in 0..len {
                    out.0[(l, channel)] += self.p[(l, s)] * qn[(l, s)];
                }
            }
        }
        out
    }
}

/// Adjoint `A*(y)` under the Frobenius and entrywise inner products:
/// `A*(y) = F* G` with `G[l, nK + k] = conj(c_hat_n[l, k]) y[l, n]`.
pub fn adjoint(y: &MeasurementSet, ens: &SubspaceEnsemble) -> Result<LiftedMatrix> {
    ens.check_measurements(y)?;
    let (len, dim) = (ens.len(), ens.dim());
    let mut out = LiftedMatrix::zeros(len, ens.lifted_cols());
    for channel in 0..ens.channels() {
        let fourier = ens.scaled_fourier(channel);
        for k in 0..dim {
            let mut col = out.0.column_mut(channel * dim + k);
            for l in 0..len {
                col[l] = fourier[(l, k)].conj() * y.0[(l, channel)];
            }
            ens.plan().inverse(col.as_mut_slice());
        }
    }
    Ok(out)
}

/// `A*(y) v` for `v` of length `KN`, without forming `A*(y)`.
pub fn adjoint_times(y: &MeasurementSet, ens: &SubspaceEnsemble, v: &[C64]) -> Result<Vec<C64>> {
    ens.check_measurements(y)?;
    if v.len() != ens.lifted_cols() {
        return Err(Error::LengthMismatch {
            expected: ens.lifted_cols(),
            actual: v.len(),
        });
    }
    let (len, dim) = (ens.len(), ens.dim());
    let mut g = vec![C64::new(0.0, 0.0); len];
    for channel in 0..ens.channels() {
        let fourier = ens.scaled_fourier(channel);
        for l in 0..len {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..dim {
                acc += fourier[(l, k)].conj() * v[channel * dim + k];
            }
            g[l] += acc * y.0[(l, channel)];
        }
    }
    ens.plan().inverse(&mut g);
    Ok(g)
}

/// `A*(y)^* u` for `u` of length `L`, without forming `A*(y)`.
pub fn adjoint_conj_times(y: &MeasurementSet, ens: &SubspaceEnsemble, u: &[C64]) -> Result<Vec<C64>> {
    ens.check_measurements(y)?;
    if u.len() != ens.len() {
        return Err(Error::LengthMismatch {
            expected: ens.len(),
            actual: u.len(),
        });
    }
    let (len, dim) = (ens.len(), ens.dim());
    let mut uf = u.to_vec();
    ens.plan().forward(&mut uf);
    let mut out = vec![C64::new(0.0, 0.0); ens.lifted_cols()];
    for channel in 0..ens.channels() {
        let fourier = ens.scaled_fourier(channel);
        for k in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..len {
                acc += fourier[(l, k)] * y.0[(l, channel)].conj() * uf[l];
            }
            out[channel * dim + k] = acc;
        }
    }
    Ok(out)
}

/// `A*A(X)`.
pub fn normal_apply(x: &LiftedMatrix, ens: &SubspaceEnsemble) -> Result<LiftedMatrix> {
    adjoint(&forward(x, ens)?, ens)
}

/// Measurements of `h m*` built from the time-domain model: column `n` is
/// `dft(h * (C_n m_n))`.
pub fn synthesize(gt: &GroundTruth, ens: &SubspaceEnsemble) -> Result<MeasurementSet> {
    gt.check_against(ens)?;
    let mut out = MeasurementSet::zeros(ens.len(), ens.channels());
    for channel in 0..ens.channels() {
        let x = to_complex(&gt.signal(ens, channel));
        let mut y = circular_convolve(&gt.h, &x)?;
        ens.plan().forward(&mut y);
        out.0.column_mut(channel).copy_from_slice(&y);
    }
    Ok(out)
}

/// `||A||` estimated as `sqrt` of the top eigenvalue of `A*A` by power
/// iteration from a seeded random start.
///
/// Each step reports `||A*A x_k|| / ||x_k||` for `x_k = (A*A)^k x_0`, which
/// is nondecreasing in `k` for a positive semidefinite operator.
pub fn operator_norm(ens: &SubspaceEnsemble, iters: usize, seed: u64) -> Result<f64> {
    let iters = iters.max(1);
    let mut stream = GaussianStream::new(seed);
    let mut x = LiftedMatrix(CMatrix::from_fn(ens.len(), ens.lifted_cols(), |_, _| stream.complex_normal()));
    let n0 = x.norm();
    x.0 /= C64::new(n0, 0.0);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let y = normal_apply(&x, ens)?;
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(0.0);
        }
        estimate = ny;
        x = LiftedMatrix(y.0 / C64::new(ny, 0.0));
    }
    Ok(estimate.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dft;

    fn setup() -> (SubspaceEnsemble, GroundTruth) {
        let ens = gen_subspaces(16, 2, 3, 42, 1.0 / 16.0).unwrap();
        let gt = GroundTruth::gaussian(16, 2, 3, 7).unwrap();
        (ens, gt)
    }

    #[test]
    fn nonpositive_dims_rejected() {
        assert!(gen_subspaces(0, 2, 3, 1, 1.0).is_err());
        assert!(gen_subspaces(8, 0, 3, 1, 1.0).is_err());
        assert!(gen_subspaces(8, 2, 0, 1, 1.0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = gen_subspaces(16, 3, 4, 99, 0.5).unwrap();
        let b = gen_subspaces(16, 3, 4, 99, 0.5).unwrap();
        for n in 0..4 {
            assert_eq!(a.basis(n), b.basis(n));
            assert_eq!(a.scaled_fourier(n), b.scaled_fourier(n));
        }
    }

    #[test]
    fn fourier_cache_consistent() {
        let (ens, _) = setup();
        let root = 4.0;
        for n in 0..3 {
            for k in 0..2 {
                let col = to_complex(ens.basis(n).column(k).as_slice());
                let fc = dft(&col).unwrap();
                for l in 0..16 {
                    assert!((ens.scaled_fourier(n)[(l, k)] - fc[l] * root).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn chat_block_structure() {
        let (ens, gt) = setup();
        for n in 0..3 {
            for l in 0..16 {
                let c = ens.chat(l, n).unwrap();
                for (j, z) in c.iter().enumerate() {
                    if j / 2 != n {
                        assert_eq!(*z, C64::new(0.0, 0.0));
                    }
                }
                let dot: C64 = c.iter().zip(&gt.m).map(|(a, b)| a * b).sum();
                let direct: C64 = (0..2).map(|k| ens.scaled_fourier(n)[(l, k)] * gt.block(n)[k]).sum();
                assert!((dot - direct).norm() < 1e-10);
            }
        }
        assert!(ens.chat(16, 0).is_err());
        assert!(ens.chat(0, 3).is_err());
    }

    #[test]
    fn zero_inputs_give_zero() {
        let (ens, gt) = setup();
        let zero_m = GroundTruth::new(gt.h.clone(), vec![0.0; 6], 2).unwrap();
        assert_eq!(synthesize(&zero_m, &ens).unwrap().norm(), 0.0);
        assert_eq!(forward(&LiftedMatrix::zeros(16, 6), &ens).unwrap().norm(), 0.0);
        assert_eq!(adjoint(&MeasurementSet::zeros(16, 3), &ens).unwrap().norm(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let (ens, _) = setup();
        assert!(forward(&LiftedMatrix::zeros(16, 5), &ens).is_err());
        assert!(adjoint(&MeasurementSet::zeros(15, 3), &ens).is_err());
        let wrong = GroundTruth::gaussian(8, 2, 3, 1).unwrap();
        assert!(synthesize(&wrong, &ens).is_err());
    }

    #[test]
    fn delta_filter_measures_input_spectrum() {
        let (ens, gt) = setup();
        let mut h = vec![C64::new(0.0, 0.0); 16];
        h[0] = C64::new(1.0, 0.0);
        let delta = GroundTruth::new(h, gt.m.clone(), 2).unwrap();
        let y = synthesize(&delta, &ens).unwrap();
        for n in 0..3 {
            let xf = dft(&to_complex(&delta.signal(&ens, n))).unwrap();
            for l in 0..16 {
                assert!((y.0[(l, n)] - xf[l]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_of_lifted_truth_matches_synthesis() {
        let (ens, gt) = setup();
        let direct = synthesize(&gt, &ens).unwrap();
        let lifted = forward(&gt.lifted(), &ens).unwrap();
        assert!((direct.0 - lifted.0).norm() < 1e-10);
    }

    #[test]
    fn factored_forward_matches_dense() {
        let (ens, _) = setup();
        let mut s = GaussianStream::new(5);
        let r1 = CMatrix::from_fn(16, 3, |_, _| s.complex_normal());
        let r2 = CMatrix::from_fn(6, 3, |_, _| s.complex_normal());
        let fm = FactoredMatrix::new(r1, r2).unwrap();
        let a = forward(&fm, &ens).unwrap();
        let b = forward(&fm.materialize(), &ens).unwrap();
        assert!((a.0 - b.0).norm() < 1e-10);
    }

    #[test]
    fn adjoint_times_helpers_match_dense() {
        let (ens, _) = setup();
        let mut s = GaussianStream::new(8);
        let y = MeasurementSet(CMatrix::from_fn(16, 3, |_, _| s.complex_normal()));
        let v: Vec<C64> = (0..6).map(|_| s.complex_normal()).collect();
        let u: Vec<C64> = (0..16).map(|_| s.complex_normal()).collect();
        let dense = adjoint(&y, &ens).unwrap().0;
        let dv = &dense * nalgebra::DVector::from_column_slice(&v);
        let du = dense.adjoint() * nalgebra::DVector::from_column_slice(&u);
        let fv = adjoint_times(&y, &ens, &v).unwrap();
        let fu = adjoint_conj_times(&y, &ens, &u).unwrap();
        for (a, b) in dv.iter().zip(&fv) {
            assert!((a - b).norm() < 1e-12);
        }
        for (a, b) in du.iter().zip(&fu) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn operator_norm_is_homogeneous() {
        let (ens, _) = setup();
        let a = operator_norm(&ens, 100, 3).unwrap();
        let b = operator_norm(&ens.scaled(2.0).unwrap(), 100, 3).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-9 * a);
        assert_eq!(a, operator_norm(&ens, 100, 3).unwrap());
    }
}
