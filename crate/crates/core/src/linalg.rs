//! Power iteration, spectral norms and conjugate gradients on complex vectors.

use nalgebra::DVector;

use crate::lifting::CMatrix;
use crate::rng::GaussianStream;
use crate::{Error, Result, C64};

pub type CVector = DVector<C64>;

/// Largest size (`rows + cols`) for which [`spectral_norm`] uses a dense SVD.
pub const DENSE_SVD_LIMIT: usize = 512;

pub fn random_cvector(dim: usize, seed: u64) -> CVector {
    let mut s = GaussianStream::new(seed);
    CVector::from_fn(dim, |_, _| s.complex_normal())
}

/// Largest `|eigenvalue|` of a Hermitian operator by power iteration.
///
/// Stops after `iters` steps or once the estimate changes by less than
/// `tol` relative.
pub fn hermitian_norm<F>(mut apply: F, dim: usize, iters: usize, tol: f64, seed: u64) -> f64
where
    F: FnMut(&CVector) -> CVector,
{
    if dim == 0 {
        return 0.0;
    }
    let mut x = random_cvector(dim, seed);
    x /= C64::new(x.norm(), 0.0);
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let y = apply(&x);
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        let converged = (ny - estimate).abs() <= tol * ny;
        estimate = ny;
        x = y / C64::new(ny, 0.0);
        if converged {
            break;
        }
    }
    estimate
}

/// Operator norm via a dense SVD.
pub fn spectral_norm_dense(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Operator norm by power iteration on the smaller Gram matrix.
pub fn spectral_norm_power(m: &CMatrix, iters: usize, tol: f64, seed: u64) -> f64 {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let lambda = if rows <= cols {
        hermitian_norm(|v| m * (m.adjoint() * v), rows, iters, tol, seed)
    } else {
        hermitian_norm(|v| m.adjoint() * (m * v), cols, iters, tol, seed)
    };
    lambda.sqrt()
}

/// Operator norm: dense SVD up to [`DENSE_SVD_LIMIT`], 300 power iterations
/// with relative tolerance `1e-10` beyond it.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() + m.ncols() <= DENSE_SVD_LIMIT {
        spectral_norm_dense(m)
    } else {
        spectral_norm_power(m, 300, 1e-10, 0x5eed)
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: CVector,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` at exit.
    pub residual: f64,
}

/// Conjugate gradients for a Hermitian positive-definite operator.
///
/// Terminates when the relative residual drops to `tol`; if it never does,
/// returns [`Error::CgNotConverged`] carrying the last residual.
pub fn conjugate_gradient<F>(mut apply: F, rhs: &CVector, tol: f64, max_iters: usize) -> Result<CgOutcome>
where
    F: FnMut(&CVector) -> CVector,
{
    let b_norm = rhs.norm();
    let mut x = CVector::zeros(rhs.len());
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    for it in 1..=max_iters {
        let ap = apply(&p);
        let curvature = p.dotc(&ap).re;
        if !(curvature > 0.0) {
            return Err(Error::CgNotConverged {
                iterations: it,
                residual: rr.sqrt() / b_norm,
            });
        }
        let alpha = C64::new(rr / curvature, 0.0);
        x.axpy(alpha, &p, C64::new(1.0, 0.0));
        r.axpy(-alpha, &ap, C64::new(1.0, 0.0));
        let rr_next = r.norm_squared();
        if rr_next.sqrt() <= tol * b_norm {
            // Report the true residual rather than the recursively updated one.
            let true_res = (rhs - apply(&x)).norm() / b_norm;
            if true_res <= tol {
                return Ok(CgOutcome {
                    x,
                    iterations: it,
                    residual: true_res,
                });
            }
            r = rhs - apply(&x);
            p = r.clone();
            rr = r.norm_squared();
            continue;
        }
        let beta = C64::new(rr_next / rr, 0.0);
        p = &r + &p * beta;
        rr = rr_next;
    }
    Err(Error::CgNotConverged {
        iterations: max_iters,
        residual: (rhs - apply(&x)).norm() / b_norm,
    })
}
