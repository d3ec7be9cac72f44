//! Slow reference implementations shared by the integration tests.
#![allow(dead_code)]

use liftdeconv::lifting::{CMatrix, GroundTruth, SubspaceEnsemble};
use liftdeconv::C64;
use std::f64::consts::TAU;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `e^{-2 pi i a b / L}` from cos/sin of the reduced exponent.
pub fn twiddle(a: usize, b: usize, len: usize) -> C64 {
    let angle = -TAU * ((a * b) % len) as f64 / len as f64;
    C64::new(angle.cos(), angle.sin())
}

pub fn naive_dft(x: &[C64]) -> Vec<C64> {
    let len = x.len();
    let scale = 1.0 / (len as f64).sqrt();
    (0..len)
        .map(|l| {
            let mut acc = C64::new(0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                acc += v * twiddle(l, j, len);
            }
            acc * scale
        })
        .collect()
}

pub fn naive_convolve(h: &[C64], x: &[C64]) -> Vec<C64> {
    let len = h.len();
    let mut y = vec![C64::new(0.0, 0.0); len];
    for l in 0..len {
        for j in 0..len {
            y[l] += h[j] * x[(l + len - j) % len];
        }
    }
    y
}

/// `A(X)[l, n]` as a plain quadruple sum:
/// `sum_i sum_k X[i, nK + k] L^{-1/2} w^{li} sum_t w^{lt} C_n[t, k]`.
pub fn oracle_forward(x: &CMatrix, ens: &SubspaceEnsemble) -> CMatrix {
    let (len, dim, channels) = (ens.len(), ens.dim(), ens.channels());
    let scale = 1.0 / (len as f64).sqrt();
    let mut out = CMatrix::zeros(len, channels);
    for n in 0..channels {
        let basis = ens.basis(n);
        for l in 0..len {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..dim {
                let mut chat = C64::new(0.0, 0.0);
                for t in 0..len {
                    chat += twiddle(l, t, len) * basis[(t, k)];
                }
                for i in 0..len {
                    acc += x[(i, n * dim + k)] * twiddle(l, i, len) * scale * chat;
                }
            }
            out[(l, n)] = acc;
        }
    }
    out
}

fn vec_len(rows: usize, cols: usize) -> usize {
    rows * cols
}

/// Matrix of a linear map on `rows x cols` matrices, column-major `vec`,
/// assembled by applying it to every unit matrix.
pub fn assemble<F>(rows: usize, cols: usize, out_len: usize, mut f: F) -> CMatrix
where
    F: FnMut(&CMatrix) -> CMatrix,
{
    let mut m = CMatrix::zeros(out_len, vec_len(rows, cols));
    for j in 0..cols {
        for i in 0..rows {
            let mut e = CMatrix::zeros(rows, cols);
            e[(i, j)] = c(1.0);
            let y = f(&e);
            m.column_mut(i + rows * j).copy_from_slice(y.as_slice());
        }
    }
    m
}

pub fn dense_operator(ens: &SubspaceEnsemble) -> CMatrix {
    assemble(ens.len(), ens.lifted_cols(), ens.len() * ens.channels(), |e| oracle_forward(e, ens))
}

/// `hh* Y + Y mm* - hh* Y mm*` with explicit dense products.
pub fn three_term_projection(y: &CMatrix, gt: &GroundTruth) -> CMatrix {
    let h = CMatrix::from_column_slice(gt.h.len(), 1, &gt.h);
    let m = CMatrix::from_column_slice(gt.m.len(), 1, &gt.m_complex());
    let hh = &h * h.adjoint();
    let mm = &m * m.adjoint();
    &hh * y + y * &mm - &hh * y * &mm
}

pub fn dense_projector(gt: &GroundTruth) -> CMatrix {
    let (len, cols) = (gt.h.len(), gt.m.len());
    assemble(len, cols, len * cols, |e| three_term_projection(e, gt))
}

pub fn as_vec(x: &CMatrix) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(x.as_slice())
}

pub fn max_abs(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn median(values: &[f64]) -> f64 {
    liftdeconv::harness::median(values)
}
