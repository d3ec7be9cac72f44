//! Dual-certificate ansatz and the two optimality conditions
//!
//! ```text
//! ||h m* - P_T(Y)||_F <= 1 / (sqrt(2) gamma c1),     ||P_T_perp(Y)|| < 1 - 1/c1
//! ```
//!
//! for `Y` in the range of `A*`, with `gamma` an estimate of `||A||`.

use serde::{Deserialize, Serialize};

use crate::lifting::{self, GroundTruth, LiftedMatrix, MeasurementSet, SubspaceEnsemble};
use crate::linalg::{conjugate_gradient, spectral_norm, CVector};
use crate::tangent::{embed_factored, project_complement, project_tangent, tangent_normal_apply, TangentElement};
use crate::{Error, Result};

/// Default relative residual for the tangent-space solve.
pub const CG_TOL: f64 = 1e-12;
/// Power iterations used for `gamma`.
pub const GAMMA_ITERS: usize = 200;
const GAMMA_SEED: u64 = 0x9a33;

/// `Y1 = A*A(h m*)`.
pub fn ansatz_direct(gt: &GroundTruth, ens: &SubspaceEnsemble) -> Result<LiftedMatrix> {
    lifting::adjoint(&lifting::synthesize(gt, ens)?, ens)
}

/// Default CG iteration cap, `dim(T) + 5`.
pub fn default_max_iters(ens: &SubspaceEnsemble) -> usize {
    ens.len() + ens.lifted_cols() + 4
}

/// Solve `(P_T A*A P_T) F = rhs` on `T` by conjugate gradients.
pub fn tangent_inverse_apply(
    rhs: &TangentElement,
    ens: &SubspaceEnsemble,
    gt: &GroundTruth,
    tol: f64,
    max_iters: usize,
) -> Result<(TangentElement, usize, f64)> {
    tangent_inverse_apply_with(rhs, gt, tol, max_iters, |t| tangent_normal_apply(t, ens, gt))
}

/// As [`tangent_inverse_apply`] with an arbitrary self-adjoint operator on
/// `T` in place of `P_T A*A P_T`.
pub fn tangent_inverse_apply_with<F>(
    rhs: &TangentElement,
    gt: &GroundTruth,
    tol: f64,
    max_iters: usize,
    mut op: F,
) -> Result<(TangentElement, usize, f64)>
where
    F: FnMut(&TangentElement) -> Result<TangentElement>,
{
    let cols = rhs.a.len();
    let rhs = rhs.clone().gauge_fixed(gt);
    let mut failure = None;
    let outcome = conjugate_gradient(
        |v| {
            let t = TangentElement::from_vector(v, cols);
            match op(&t) {
                Ok(out) => out.gauge_fixed(gt).to_vector(),
                Err(e) => {
                    failure.get_or_insert(e);
                    CVector::zeros(v.len())
                }
            }
        },
        &rhs.to_vector(),
        tol,
        max_iters,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = outcome?;
    Ok((TangentElement::from_vector(&outcome.x, cols), outcome.iterations, outcome.residual))
}

#[derive(Clone, Debug)]
pub struct InverseAnsatz {
    /// `Y2 = A*(q)`.
    pub y: LiftedMatrix,
    /// `q = A(F)`.
    pub q: MeasurementSet,
    pub f: TangentElement,
    pub cg_iterations: usize,
    pub cg_residual: f64,
}

/// `Y2 = A*A(F)` with `F` the solution of `(P_T A*A P_T) F = h m*`.
pub fn ansatz_inverse(gt: &GroundTruth, ens: &SubspaceEnsemble, tol: f64) -> Result<InverseAnsatz> {
    let rhs = project_tangent(&gt.lifted(), gt)?;
    let (f, cg_iterations, cg_residual) = tangent_inverse_apply(&rhs, ens, gt, tol, default_max_iters(ens))?;
    let q = lifting::forward(&embed_factored(&f, gt), ens)?;
    let y = lifting::adjoint(&q, ens)?;
    Ok(InverseAnsatz {
        y,
        q,
        f,
        cg_iterations,
        cg_residual,
    })
}

/// `||P_T_perp A*A P_T (P_T - P_T A*A P_T)^k h m*||` for `k = 0..=k_max`.
pub fn neumann_term_norms(gt: &GroundTruth, ens: &SubspaceEnsemble, k_max: usize) -> Result<Vec<f64>> {
    let mut t = project_tangent(&gt.lifted(), gt)?;
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let y = lifting::adjoint(&lifting::forward(&embed_factored(&t, gt), ens)?, ens)?;
        out.push(spectral_norm(&project_complement(&y, gt)?.0));
        if k < k_max {
            let nt = tangent_normal_apply(&t, ens, gt)?;
            t = TangentElement {
                a: &t.a - nt.a,
                b: &t.b - nt.b,
            };
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `||P_T(Y) - h m*||_F`.
    pub tangent_residual: f64,
    /// `||P_T_perp(Y)||`.
    pub complement_norm: f64,
    pub gamma: f64,
    pub c1: f64,
    pub first_condition: bool,
    pub second_condition: bool,
}

impl CertificateReport {
    pub fn conditions_met(&self) -> (bool, bool) {
        (self.first_condition, self.second_condition)
    }

    pub fn certified(&self) -> bool {
        self.first_condition && self.second_condition
    }
}

/// Evaluate both conditions for `Y`, estimating `gamma = ||A||` first.
pub fn check_conditions(y: &LiftedMatrix, gt: &GroundTruth, ens: &SubspaceEnsemble, c1: f64) -> Result<CertificateReport> {
    let gamma = lifting::operator_norm(ens, GAMMA_ITERS, GAMMA_SEED)?;
    check_conditions_with_gamma(y, gt, gamma, c1)
}

pub fn check_conditions_with_gamma(y: &LiftedMatrix, gt: &GroundTruth, gamma: f64, c1: f64) -> Result<CertificateReport> {
    if !(c1 > 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidParameter("c1 must be positive and gamma nonnegative".into()));
    }
    let t = project_tangent(y, gt)?;
    let truth = project_tangent(&gt.lifted(), gt)?;
    let tangent_residual = TangentElement {
        a: t.a - truth.a,
        b: t.b - truth.b,
    }
    .norm();
    let complement_norm = spectral_norm(&project_complement(y, gt)?.0);
    Ok(CertificateReport {
        tangent_residual,
        complement_norm,
        gamma,
        c1,
        first_condition: tangent_residual <= 1.0 / (std::f64::consts::SQRT_2 * gamma * c1),
        second_condition: complement_norm < 1.0 - 1.0 / c1,
    })
}

/// Both ansatz evaluated on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub seed: u64,
    pub dim: usize,
    pub len: usize,
    pub channels: usize,
    pub direct: CertificateReport,
    /// `None` when the tangent-space solve failed.
    pub inverse: Option<CertificateReport>,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub tangent_deviation: f64,
}

pub fn certify_instance(
    gt: &GroundTruth,
    ens: &SubspaceEnsemble,
    seed: u64,
    c1: f64,
    deviation_iters: usize,
) -> Result<CertificateRow> {
    let gamma = lifting::operator_norm(ens, GAMMA_ITERS, GAMMA_SEED)?;
    let direct = check_conditions_with_gamma(&ansatz_direct(gt, ens)?, gt, gamma, c1)?;
    let (inverse, cg_iterations, cg_residual) = match ansatz_inverse(gt, ens, CG_TOL) {
        Ok(ans) => (
            Some(check_conditions_with_gamma(&ans.y, gt, gamma, c1)?),
            ans.cg_iterations,
            ans.cg_residual,
        ),
        Err(Error::CgNotConverged { iterations, residual }) => (None, iterations, residual),
        Err(e) => return Err(e),
    };
    let tangent_deviation = if deviation_iters > 0 {
        crate::tangent::tangent_normal_deviation(ens, gt, deviation_iters)?
    } else {
        f64::NAN
    };
    Ok(CertificateRow {
        seed,
        dim: ens.dim(),
        len: ens.len(),
        channels: ens.channels(),
        direct,
        inverse,
        cg_iterations,
        cg_residual,
        tangent_deviation,
    })
}

/// Tangent residual of `Y2` read off the stored `F` directly, `||P_T A*A F - h m*||`.
pub fn inverse_residual(ans: &InverseAnsatz, gt: &GroundTruth) -> Result<f64> {
    let t = project_tangent(&ans.y, gt)?;
    let truth = project_tangent(&gt.lifted(), gt)?;
    Ok(TangentElement {
        a: t.a - truth.a,
        b: t.b - truth.b,
    }
    .norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use crate::lifting::gen_subspaces;

    fn instance(k: usize, l: usize, n: usize, seed: u64) -> (SubspaceEnsemble, GroundTruth) {
        (
            gen_subspaces(l, k, n, seed, 1.0 / l as f64).unwrap(),
            GroundTruth::gaussian(l, k, n, seed ^ 0xff).unwrap(),
        )
    }

    #[test]
    fn direct_ansatz_is_homogeneous() {
        let (ens, gt) = instance(2, 16, 4, 1);
        let y1 = ansatz_direct(&gt, &ens).unwrap();
        let scaled = GroundTruth::new(gt.h.clone(), gt.m.iter().map(|v| 3.0 * v).collect(), 2).unwrap();
        let y3 = ansatz_direct(&scaled, &ens).unwrap();
        assert!((y3.0 - &y1.0 * C64::new(3.0, 0.0)).norm() < 1e-10 * y1.norm());
    }

    #[test]
    fn zero_certificate_report() {
        let (ens, gt) = instance(2, 16, 4, 2);
        let r = check_conditions(&LiftedMatrix::zeros(16, 8), &gt, &ens, 2.0).unwrap();
        assert!((r.tangent_residual - 1.0).abs() < 1e-12);
        assert_eq!(r.complement_norm, 0.0);
        assert!(r.second_condition);
    }

    #[test]
    fn inverse_ansatz_matches_first_condition() {
        let (ens, gt) = instance(2, 32, 8, 3);
        let ans = ansatz_inverse(&gt, &ens, CG_TOL).unwrap();
        assert!(ans.cg_residual <= CG_TOL);
        assert!(inverse_residual(&ans, &gt).unwrap() < 1e-10);
        assert!(ans.cg_iterations <= default_max_iters(&ens));
        let back = lifting::adjoint(&ans.q, &ens).unwrap();
        assert!((back.0 - &ans.y.0).norm() < 1e-12 * ans.y.norm());
    }

    #[test]
    fn identity_operator_returns_rhs() {
        let (_, gt) = instance(2, 16, 4, 4);
        let rhs = project_tangent(&gt.lifted(), &gt).unwrap();
        let (f, _, res) = tangent_inverse_apply_with(&rhs, &gt, CG_TOL, 10, |t| Ok(t.clone())).unwrap();
        assert!(res <= CG_TOL);
        assert!((f.to_vector() - rhs.to_vector()).norm() < 1e-14);
    }

    #[test]
    fn first_neumann_term_is_direct_complement() {
        let (ens, gt) = instance(2, 32, 8, 5);
        let terms = neumann_term_norms(&gt, &ens, 3).unwrap();
        assert_eq!(terms.len(), 4);
        assert!(terms.iter().all(|t| *t >= 0.0));
        let y1 = ansatz_direct(&gt, &ens).unwrap();
        let c = spectral_norm(&project_complement(&y1, &gt).unwrap().0);
        assert!((terms[0] - c).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_c1() {
        let (_, gt) = instance(2, 16, 4, 6);
        assert!(check_conditions_with_gamma(&LiftedMatrix::zeros(16, 8), &gt, 1.0, 0.0).is_err());
    }
}
