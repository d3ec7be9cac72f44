//! Factored augmented-Lagrangian solver for the lifted nuclear-norm program.
//!
//! The trace form of the program is parametrized as `V = R R*` with
//! `R = [R1; R2]`, so `X = R1 R2*` and `Tr V = ||R1||^2 + ||R2||^2`. Each
//! outer round minimizes
//!
//! ```text
//! 1/2 ||R1||^2 + 1/2 ||R2||^2 + Re<lambda, r> + sigma/2 ||r||^2,   r = A(R1 R2*) - y
//! ```
//!
//! with L-BFGS over the real and imaginary parts of `R1`, `R2`, then updates
//! `lambda <- lambda + sigma r`. One outer round with `lambda = 0` is a pure
//! penalty method.

pub mod lbfgs;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use lbfgs::{lbfgs_minimize, ArmijoParams, LbfgsOutcome, LbfgsParams, LbfgsStatus};

use crate::lifting::{CMatrix, FactorTransforms, FactoredMatrix, GroundTruth, MeasurementSet, SubspaceEnsemble};
use crate::rng::GaussianStream;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub sigma: f64,
    /// L-BFGS iterations per outer round.
    pub inner_iters: usize,
    /// Number of multiplier rounds.
    pub outer_iters: usize,
    pub lbfgs_memory: usize,
    pub armijo: ArmijoParams,
    pub grad_tol: f64,
    /// Relative feasibility `||A(X) - y|| / ||y||` required to report convergence.
    pub feas_tol: f64,
    /// Rescale each constraint row to unit norm (see [`equilibration_weights`]).
    pub equilibrate: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank: 4,
            sigma: 10.0,
            inner_iters: 40,
            outer_iters: 1,
            lbfgs_memory: 10,
            armijo: ArmijoParams::default(),
            grad_tol: 1e-10,
            feas_tol: 1e-4,
            equilibrate: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Method of multipliers with `outer_iters` rounds and otherwise default settings.
    pub fn multipliers(outer_iters: usize) -> Self {
        Self {
            outer_iters,
            ..Self::default()
        }
    }

    /// Multipliers with equilibrated constraints, for low-pass data whose
    /// measurement rows differ widely in strength.
    pub fn superres() -> Self {
        Self {
            equilibrate: true,
            ..Self::multipliers(8)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 || self.inner_iters == 0 || self.outer_iters == 0 || self.lbfgs_memory == 0 {
            return Err(Error::InvalidParameter(
                "rank, inner_iters, outer_iters and lbfgs_memory must be positive".into(),
            ));
        }
        if !(self.sigma > 0.0) || !(self.grad_tol > 0.0) || !(self.feas_tol > 0.0) {
            return Err(Error::InvalidParameter("sigma, grad_tol and feas_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub factors: FactoredMatrix,
    /// `||X - h m*||_F / ||h m*||_F` when the ground truth was supplied.
    pub rel_error: Option<f64>,
    /// `||A(X) - y|| / ||y||`.
    pub feasibility: f64,
    /// `1/2 ||R1||^2 + 1/2 ||R2||^2`, the trace objective.
    pub objective: f64,
    /// Accepted L-BFGS steps summed over all rounds.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub line_search_failures: usize,
    pub converged: bool,
}

/// Plain record of a solve, serialized as JSON by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub rank: usize,
    pub rel_error: Option<f64>,
    pub feasibility: f64,
    pub objective: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub line_search_failures: usize,
    pub converged: bool,
}

impl SolveResult {
    pub fn record(&self) -> SolveRecord {
        SolveRecord {
            rank: self.factors.rank(),
            rel_error: self.rel_error,
            feasibility: self.feasibility,
            objective: self.objective,
            iterations: self.iterations,
            outer_iterations: self.outer_iterations,
            line_search_failures: self.line_search_failures,
            converged: self.converged,
        }
    }
}

/// Complex Gaussian factors, each scaled to unit Frobenius norm.
pub fn init_factors(len: usize, dim: usize, channels: usize, rank: usize, seed: u64) -> Result<FactoredMatrix> {
    if len == 0 || dim == 0 || channels == 0 || rank == 0 {
        return Err(Error::InvalidDimension("factor dimensions must be positive".into()));
    }
    let mut stream = GaussianStream::new(seed);
    let mut r1 = CMatrix::from_fn(len, rank, |_, _| stream.complex_normal());
    let mut r2 = CMatrix::from_fn(dim * channels, rank, |_, _| stream.complex_normal());
    let (n1, n2) = (r1.norm(), r2.norm());
    r1 /= C64::new(n1, 0.0);
    r2 /= C64::new(n2, 0.0);
    FactoredMatrix::new(r1, r2)
}

/// Weights `w[l, n] = rms / ||c_hat_{l,n}||` that give every measurement
/// functional the same norm, with `rms` the root mean square of the row
/// norms. Rows with no energy keep weight one.
///
/// Scaling constraints leaves the feasible set unchanged; it only improves
/// the conditioning of the penalty when some rows are much weaker than
/// others, as with low-pass data.
pub fn equilibration_weights(ens: &SubspaceEnsemble) -> DMatrix<f64> {
    let (len, channels) = (ens.len(), ens.channels());
    let norms = DMatrix::from_fn(len, channels, |l, n| ens.scaled_fourier(n).row(l).norm());
    let rms = (norms.norm_squared() / (len * channels) as f64).sqrt();
    norms.map(|v| if v > 1e-12 * rms { rms / v } else { 1.0 })
}

fn check_measurements(y: &MeasurementSet, ens: &SubspaceEnsemble) -> Result<()> {
    if y.0.nrows() != ens.len() || y.0.ncols() != ens.channels() {
        return Err(Error::ShapeMismatch {
            expected_rows: ens.len(),
            expected_cols: ens.channels(),
            rows: y.0.nrows(),
            cols: y.0.ncols(),
        });
    }
    Ok(())
}

struct Evaluation {
    value: f64,
    grad_r1: CMatrix,
    grad_r2: CMatrix,
}

fn evaluate(
    x: &FactoredMatrix,
    multipliers: &MeasurementSet,
    sigma: f64,
    y: &MeasurementSet,
    ens: &SubspaceEnsemble,
    row_weights: Option<&DMatrix<f64>>,
    with_grad: bool,
) -> Result<Evaluation> {
    check_measurements(y, ens)?;
    check_measurements(multipliers, ens)?;
    let transforms = FactorTransforms::new(x, ens)?;
    let mut residual = transforms.measurements().0 - &y.0;
    if let Some(w) = row_weights {
        residual.zip_apply(w, |r, w| *r *= w);
    }
    let mut value = 0.5 * (x.r1.norm_squared() + x.r2.norm_squared());
    value += multipliers.0.zip_fold(&residual, 0.0, |acc, l, r| acc + (l.conj() * r).re);
    value += 0.5 * sigma * residual.norm_squared();
    if !with_grad {
        return Ok(Evaluation {
            value,
            grad_r1: CMatrix::zeros(0, 0),
            grad_r2: CMatrix::zeros(0, 0),
        });
    }

    let (len, dim, rank) = (ens.len(), ens.dim(), x.rank());
    // W = lambda + sigma r weights every residual entry.
    let mut weights = &multipliers.0 + residual * C64::new(sigma, 0.0);
    if let Some(w) = row_weights {
        weights.zip_apply(w, |r, w| *r *= w);
    }

    // R1 part: F* B with B[l, s] = sum_n W[l, n] conj(Q_n[l, s]).
    let mut b = CMatrix::zeros(len, rank);
    for (channel, qn) in transforms.q.iter().enumerate() {
        for s in 0..rank {
            for l in 0..len {
                b[(l, s)] += weights[(l, channel)] * qn[(l, s)].conj();
            }
        }
    }
    for s in 0..rank {
        ens.plan().inverse(b.column_mut(s).as_mut_slice());
    }
    let grad_r1 = &x.r1 + b;

    // R2 part: D[nK + k, s] = sum_l conj(W[l, n]) P[l, s] c_hat_n[l, k].
    let mut grad_r2 = x.r2.clone();
    let mut wp = vec![C64::new(0.0, 0.0); len];
    for channel in 0..ens.channels() {
        let fourier = ens.scaled_fourier(channel);
        for s in 0..rank {
            for l in 0..len {
                wp[l] = weights[(l, channel)].conj() * transforms.p[(l, s)];
            }
            for k in 0..dim {
                let col = fourier.column(k);
                let acc: C64 = wp.iter().zip(col.iter()).map(|(a, c)| a * c).sum();
                grad_r2[(channel * dim + k, s)] += acc;
            }
        }
    }
    Ok(Evaluation { value, grad_r1, grad_r2 })
}

/// Augmented Lagrangian at `x`.
pub fn lagrangian_value(
    x: &FactoredMatrix,
    multipliers: &MeasurementSet,
    sigma: f64,
    y: &MeasurementSet,
    ens: &SubspaceEnsemble,
) -> Result<f64> {
    evaluate(x, multipliers, sigma, y, ens, None, false).map(|e| e.value)
}

/// Gradient of the augmented Lagrangian with respect to the real
/// parametrization. Entry `(i, s)` of each returned matrix packs
/// `df/dRe + i df/dIm` for the matching factor entry.
pub fn lagrangian_grad(
    x: &FactoredMatrix,
    multipliers: &MeasurementSet,
    sigma: f64,
    y: &MeasurementSet,
    ens: &SubspaceEnsemble,
) -> Result<(CMatrix, CMatrix)> {
    evaluate(x, multipliers, sigma, y, ens, None, true).map(|e| (e.grad_r1, e.grad_r2))
}

/// Flatten `(R1, R2)` to `[Re, Im]` pairs, `R1` first, column-major.
pub fn pack(x: &FactoredMatrix) -> Vec<f64> {
    x.r1.iter()
        .chain(x.r2.iter())
        .flat_map(|z| [z.re, z.im])
        .collect()
}

pub fn unpack(v: &[f64], len: usize, cols: usize, rank: usize) -> FactoredMatrix {
    let split = 2 * len * rank;
    let to_c = |chunk: &[f64]| C64::new(chunk[0], chunk[1]);
    let r1 = CMatrix::from_iterator(len, rank, v[..split].chunks_exact(2).map(to_c));
    let r2 = CMatrix::from_iterator(cols, rank, v[split..].chunks_exact(2).map(to_c));
    FactoredMatrix { r1, r2 }
}

fn pack_grad(g1: &CMatrix, g2: &CMatrix) -> Vec<f64> {
    g1.iter().chain(g2.iter()).flat_map(|z| [z.re, z.im]).collect()
}

/// `||R1 R2* - h m*||_F / ||h m*||_F`, evaluated through `r x r` Gram
/// matrices so `R1 R2*` is never formed.
pub fn relative_error(x: &FactoredMatrix, gt: &GroundTruth) -> Result<f64> {
    if x.r1.nrows() != gt.h.len() || x.r2.nrows() != gt.m.len() {
        return Err(Error::ShapeMismatch {
            expected_rows: gt.h.len(),
            expected_cols: gt.m.len(),
            rows: x.r1.nrows(),
            cols: x.r2.nrows(),
        });
    }
    let g1 = x.r1.adjoint() * &x.r1;
    let g2 = x.r2.adjoint() * &x.r2;
    let x_sq = (g1 * g2).trace().re;
    let h = nalgebra::DVector::from_column_slice(&gt.h);
    let m = nalgebra::DVector::from_column_slice(&gt.m_complex());
    // <h m*, R1 R2*> = (h* R1)(R2* m)
    let cross = (h.adjoint() * &x.r1 * (x.r2.adjoint() * &m))[(0, 0)].re;
    let truth_sq = h.norm_squared() * m.norm_squared();
    if truth_sq == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(((x_sq - 2.0 * cross + truth_sq).max(0.0) / truth_sq).sqrt())
}

/// Run the augmented-Lagrangian solve. Line-search failures end the current
/// round and are reported in the result rather than raised.
pub fn alm_solve(
    y: &MeasurementSet,
    ens: &SubspaceEnsemble,
    config: &SolverConfig,
    gt: Option<&GroundTruth>,
) -> Result<SolveResult> {
    config.validate()?;
    check_measurements(y, ens)?;
    if !y.is_finite() {
        return Err(Error::InvalidParameter("measurements contain non-finite values".into()));
    }
    let (len, dim, channels, cols) = (ens.len(), ens.dim(), ens.channels(), ens.lifted_cols());
    let y_norm = y.norm();
    let rel_error_of = |f: &FactoredMatrix| gt.map(|g| relative_error(f, g)).transpose();

    if y_norm == 0.0 {
        let factors = FactoredMatrix::new(CMatrix::zeros(len, config.rank), CMatrix::zeros(cols, config.rank))?;
        return Ok(SolveResult {
            rel_error: rel_error_of(&factors)?,
            factors,
            feasibility: 0.0,
            objective: 0.0,
            iterations: 0,
            outer_iterations: 0,
            line_search_failures: 0,
            converged: true,
        });
    }

    let weights = config.equilibrate.then(|| equilibration_weights(ens));
    let mut factors = init_factors(len, dim, channels, config.rank, config.seed)?;
    let mut multipliers = MeasurementSet::zeros(len, channels);
    let params = LbfgsParams {
        max_iters: config.inner_iters,
        memory: config.lbfgs_memory,
        grad_tol: config.grad_tol,
        armijo: config.armijo,
    };
    let mut iterations = 0;
    let mut line_search_failures = 0;
    let mut outer_iterations = 0;
    let mut failure: Option<Error> = None;

    for _ in 0..config.outer_iters {
        let objective = |v: &[f64]| {
            let x = unpack(v, len, cols, config.rank);
            match evaluate(&x, &multipliers, config.sigma, y, ens, weights.as_ref(), true) {
                Ok(e) => (e.value, pack_grad(&e.grad_r1, &e.grad_r2)),
                Err(err) => {
                    failure.get_or_insert(err);
                    (f64::NAN, vec![0.0; v.len()])
                }
            }
        };
        let outcome = lbfgs_minimize(objective, pack(&factors), &params);
        if let Some(err) = failure.take() {
            return Err(err);
        }
        factors = unpack(&outcome.x, len, cols, config.rank);
        iterations += outcome.iterations;
        outer_iterations += 1;
        if outcome.status == LbfgsStatus::LineSearchFailed {
            line_search_failures += 1;
        }
        let mut residual = crate::lifting::forward(&factors, ens)?.0 - &y.0;
        if let Some(w) = &weights {
            residual.zip_apply(w, |r, w| *r *= w);
        }
        if config.outer_iters > 1 {
            multipliers.0 += residual * C64::new(config.sigma, 0.0);
        }
    }

    let residual = crate::lifting::forward(&factors, ens)?.0 - &y.0;
    let feasibility = residual.norm() / y_norm;
    let objective = 0.5 * (factors.r1.norm_squared() + factors.r2.norm_squared());
    Ok(SolveResult {
        rel_error: rel_error_of(&factors)?,
        feasibility,
        objective,
        iterations,
        outer_iterations,
        line_search_failures,
        converged: line_search_failures == 0 && feasibility <= config.feas_tol,
        factors,
    })
}
