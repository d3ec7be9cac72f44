//! Tangent space of the rank-one manifold at `X0 = h m*`.
//!
//! `T = { h a* + b m* }`. Elements are stored as the pair `(a, b)` with the
//! gauge `<b, h> = 0`, which makes the parametrization unique. The map
//! `(a, b) -> h a* + b m*` is only real-linear (it conjugates `a`); for
//! unit-norm `h`, `m` it is an isometry onto `T` for the real inner product
//! `Re <a1, a2> + Re <b1, b2>`.

use crate::lifting::{self, CMatrix, FactoredMatrix, GroundTruth, LiftedMatrix, SubspaceEnsemble};
use crate::linalg::{hermitian_norm, CVector};
use crate::spectral::{dft, norm};
use crate::{Error, Result, C64};

/// Tolerance on `||h|| = ||m|| = 1` required by the projectors.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// `h a* + b m*` with `<b, h> = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentElement {
    /// Length `KN`.
    pub a: CVector,
    /// Length `L`.
    pub b: CVector,
}

impl TangentElement {
    pub fn zeros(len: usize, lifted_cols: usize) -> Self {
        Self {
            a: CVector::zeros(lifted_cols),
            b: CVector::zeros(len),
        }
    }

    /// `<a1, a2> + <b1, b2>`. Only the real part is the Frobenius inner
    /// product of the embedded matrices.
    pub fn inner(&self, other: &TangentElement) -> C64 {
        self.a.dotc(&other.a) + self.b.dotc(&other.b)
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_squared() + self.b.norm_squared()).sqrt()
    }

    /// Flatten to `[a; b]`.
    pub fn to_vector(&self) -> CVector {
        let mut v = CVector::zeros(self.a.len() + self.b.len());
        v.rows_mut(0, self.a.len()).copy_from(&self.a);
        v.rows_mut(self.a.len(), self.b.len()).copy_from(&self.b);
        v
    }

    pub fn from_vector(v: &CVector, lifted_cols: usize) -> Self {
        Self {
            a: v.rows(0, lifted_cols).into_owned(),
            b: v.rows(lifted_cols, v.len() - lifted_cols).into_owned(),
        }
    }

    /// Remove the component of `b` along `h`.
    pub fn gauge_fixed(mut self, gt: &GroundTruth) -> Self {
        let h = CVector::from_column_slice(&gt.h);
        let along = h.dotc(&self.b);
        self.b.axpy(-along, &h, C64::new(1.0, 0.0));
        self
    }
}

fn check_unit(gt: &GroundTruth) -> Result<()> {
    let hn = norm(&gt.h);
    if (hn - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnitNorm { norm: hn });
    }
    let mn = gt.m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (mn - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnitNorm { norm: mn });
    }
    Ok(())
}

fn check_shape(y: &CMatrix, gt: &GroundTruth) -> Result<()> {
    if y.nrows() != gt.h.len() || y.ncols() != gt.m.len() {
        return Err(Error::ShapeMismatch {
            expected_rows: gt.h.len(),
            expected_cols: gt.m.len(),
            rows: y.nrows(),
            cols: y.ncols(),
        });
    }
    Ok(())
}

/// `P_T(Y) = h h* Y + Y m m* - h h* Y m m*`, returned as `a = Y* h`,
/// `b = Y m - h (h* Y m)`.
pub fn project_tangent(y: &LiftedMatrix, gt: &GroundTruth) -> Result<TangentElement> {
    check_unit(gt)?;
    check_shape(&y.0, gt)?;
    let h = CVector::from_column_slice(&gt.h);
    let m = CVector::from_column_slice(&gt.m_complex());
    let a = y.0.adjoint() * &h;
    let ym = &y.0 * &m;
    let b = &ym - &h * h.dotc(&ym);
    Ok(TangentElement { a, b })
}

/// `h a* + b m*`.
pub fn embed(t: &TangentElement, gt: &GroundTruth) -> LiftedMatrix {
    let h = CVector::from_column_slice(&gt.h);
    let m = CVector::from_column_slice(&gt.m_complex());
    LiftedMatrix(&h * t.a.adjoint() + &t.b * m.adjoint())
}

/// The same element as a rank-2 factor pair `[h, b] [a, m]*`.
pub fn embed_factored(t: &TangentElement, gt: &GroundTruth) -> FactoredMatrix {
    let len = gt.h.len();
    let cols = gt.m.len();
    let mut r1 = CMatrix::zeros(len, 2);
    let mut r2 = CMatrix::zeros(cols, 2);
    r1.column_mut(0).copy_from_slice(&gt.h);
    r1.column_mut(1).copy_from(&t.b);
    r2.column_mut(0).copy_from(&t.a);
    r2.column_mut(1).copy_from_slice(&gt.m_complex());
    FactoredMatrix { r1, r2 }
}

/// `P_T_perp(Y) = Y - P_T(Y)`.
pub fn project_complement(y: &LiftedMatrix, gt: &GroundTruth) -> Result<LiftedMatrix> {
    let t = project_tangent(y, gt)?;
    Ok(LiftedMatrix(&y.0 - embed(&t, gt).0))
}

/// Squared block coherence `N max_n ||m_n||^2 / ||m||^2`.
pub fn coherence_mu_m(m: &[C64], channels: usize, dim: usize) -> Result<f64> {
    if channels == 0 || dim == 0 || m.len() != channels * dim {
        return Err(Error::LengthMismatch {
            expected: channels * dim,
            actual: m.len(),
        });
    }
    let total = energy(m);
    if total == 0.0 {
        return Err(Error::ZeroVector);
    }
    let peak = m.chunks(dim).map(energy).fold(0.0, f64::max);
    Ok(channels as f64 * peak / total)
}

/// Squared spectral coherence `L max_l |h_hat[l]|^2 / ||h||^2`.
pub fn coherence_mu_h(h: &[C64]) -> Result<f64> {
    spectral_coherence(h, 2)
}

/// The unsquared reading `L max_l |h_hat[l]| / ||h||^2`, as printed
/// alongside the squared form; kept for comparison only.
pub fn coherence_mu_h_unsquared(h: &[C64]) -> Result<f64> {
    spectral_coherence(h, 1)
}

fn energy(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn spectral_coherence(h: &[C64], power: i32) -> Result<f64> {
    let total = energy(h);
    if total == 0.0 {
        return Err(Error::ZeroVector);
    }
    let peak = dft(h)?
        .iter()
        .map(|z| if power == 2 { z.norm_sqr() } else { z.norm() })
        .fold(0.0, f64::max);
    Ok(h.len() as f64 * peak / total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherencePair {
    pub mu_m_sq: f64,
    pub mu_h_sq: f64,
}

pub fn coherences(gt: &GroundTruth) -> Result<CoherencePair> {
    Ok(CoherencePair {
        mu_m_sq: coherence_mu_m(&gt.m_complex(), gt.channels(), gt.dim())?,
        mu_h_sq: coherence_mu_h(&gt.h)?,
    })
}

/// `P_T A*A P_T` applied to a tangent element, matrix-free: the rank-2
/// embedding goes through the factored forward operator and the projection
/// only needs `A*(y)* h` and `A*(y) m`.
pub fn tangent_normal_apply(t: &TangentElement, ens: &SubspaceEnsemble, gt: &GroundTruth) -> Result<TangentElement> {
    check_unit(gt)?;
    if t.a.len() != ens.lifted_cols() || t.b.len() != ens.len() {
        return Err(Error::ShapeMismatch {
            expected_rows: ens.len(),
            expected_cols: ens.lifted_cols(),
            rows: t.b.len(),
            cols: t.a.len(),
        });
    }
    let y = lifting::forward(&embed_factored(t, gt), ens)?;
    let a = CVector::from_vec(lifting::adjoint_conj_times(&y, ens, &gt.h)?);
    let ym = CVector::from_vec(lifting::adjoint_times(&y, ens, &gt.m_complex())?);
    let h = CVector::from_column_slice(&gt.h);
    let b = &ym - &h * h.dotc(&ym);
    Ok(TangentElement { a, b })
}

/// `|| P_T A*A P_T - P_T ||` restricted to `T`, by power iteration on the
/// self-adjoint residual operator.
pub fn tangent_normal_deviation(ens: &SubspaceEnsemble, gt: &GroundTruth, power_iters: usize) -> Result<f64> {
    check_unit(gt)?;
    let cols = ens.lifted_cols();
    let dim = cols + ens.len();
    let mut failure = None;
    let estimate = hermitian_norm(
        |v| {
            let t = TangentElement::from_vector(v, cols).gauge_fixed(gt);
            match tangent_normal_apply(&t, ens, gt) {
                Ok(nt) => {
                    let diff = TangentElement {
                        a: nt.a - &t.a,
                        b: nt.b - &t.b,
                    };
                    diff.gauge_fixed(gt).to_vector()
                }
                Err(e) => {
                    failure = Some(e);
                    CVector::zeros(dim)
                }
            }
        },
        dim,
        power_iters,
        1e-12,
        0x7a46,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(estimate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianStream;

    fn instance() -> (SubspaceEnsemble, GroundTruth) {
        let ens = lifting::gen_subspaces(16, 2, 3, 21, 1.0 / 16.0).unwrap();
        let gt = GroundTruth::gaussian(16, 2, 3, 4).unwrap();
        (ens, gt)
    }

    fn random_lifted(rows: usize, cols: usize, seed: u64) -> LiftedMatrix {
        let mut s = GaussianStream::new(seed);
        LiftedMatrix(CMatrix::from_fn(rows, cols, |_, _| s.complex_normal()))
    }

    #[test]
    fn truth_is_fixed_point() {
        let (_, gt) = instance();
        let x0 = gt.lifted();
        let back = embed(&project_tangent(&x0, &gt).unwrap(), &gt);
        assert!((back.0 - x0.0).norm() < 1e-14);
    }

    #[test]
    fn left_multiples_of_h_are_in_t() {
        let (_, gt) = instance();
        let mut s = GaussianStream::new(2);
        let z = CVector::from_fn(6, |_, _| s.complex_normal());
        let y = LiftedMatrix(CVector::from_column_slice(&gt.h) * z.adjoint());
        let p = embed(&project_tangent(&y, &gt).unwrap(), &gt);
        assert!((p.0 - y.0).norm() < 1e-13);
    }

    #[test]
    fn embed_basic_cases() {
        let (_, gt) = instance();
        let t = TangentElement {
            a: CVector::from_column_slice(&gt.m_complex()),
            b: CVector::zeros(16),
        };
        assert!((embed(&t, &gt).0 - gt.lifted().0).norm() < 1e-15);
        assert_eq!(embed(&TangentElement::zeros(16, 6), &gt).norm(), 0.0);
    }

    #[test]
    fn complement_of_tangent_element_vanishes() {
        let (_, gt) = instance();
        let y = random_lifted(16, 6, 3);
        let t = project_tangent(&y, &gt).unwrap();
        assert!(project_complement(&embed(&t, &gt), &gt).unwrap().norm() < 1e-13);
    }

    #[test]
    fn rejects_non_unit_truth() {
        let (_, gt) = instance();
        let scaled = GroundTruth::new(gt.h.iter().map(|z| z * 2.0).collect(), gt.m.clone(), 2).unwrap();
        assert!(matches!(
            project_tangent(&gt.lifted(), &scaled),
            Err(Error::NotUnitNorm { .. })
        ));
    }

    #[test]
    fn coherence_extremes() {
        let flat = vec![C64::new(0.5, 0.0); 12];
        assert!((coherence_mu_m(&flat, 4, 3).unwrap() - 1.0).abs() < 1e-14);
        let mut spike = vec![C64::new(0.0, 0.0); 12];
        spike[4] = C64::new(1.0, 0.0);
        assert!((coherence_mu_m(&spike, 4, 3).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(coherence_mu_m(&[C64::new(0.0, 0.0); 12], 4, 3), Err(Error::ZeroVector)));

        let mut e1 = vec![C64::new(0.0, 0.0); 16];
        e1[0] = C64::new(1.0, 0.0);
        assert!((coherence_mu_h(&e1).unwrap() - 1.0).abs() < 1e-13);
        // Single Fourier spike: h = F* e_1 (already unit norm).
        let tone = crate::spectral::idft(&e1).unwrap();
        let tone: Vec<C64> = tone.iter().map(|z| z * 4.0).collect();
        assert!((coherence_mu_h(&tone).unwrap() - 16.0).abs() < 1e-12);
        assert!(matches!(coherence_mu_h(&[C64::new(0.0, 0.0); 4]), Err(Error::ZeroVector)));
    }

    #[test]
    fn unsquared_reading_differs() {
        let (_, gt) = instance();
        let sq = coherence_mu_h(&gt.h).unwrap();
        let unsq = coherence_mu_h_unsquared(&gt.h).unwrap();
        assert!((1.0..=16.0).contains(&sq));
        assert!((unsq - sq).abs() > 1e-6);
    }

    #[test]
    fn tangent_normal_shape_error() {
        let (ens, gt) = instance();
        assert!(tangent_normal_apply(&TangentElement::zeros(16, 5), &ens, &gt).is_err());
    }
}
