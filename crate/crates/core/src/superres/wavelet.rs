//! Periodic orthonormal discrete wavelet transforms.
//!
//! Coefficients are laid out as `[a_J | d_J | d_{J-1} | ... | d_1]`, where
//! level `j` details have length `L / 2^j` and start at offset `L / 2^j`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveletKind {
    Haar,
    /// Four-tap Daubechies filter (two vanishing moments).
    Daubechies4,
}

impl WaveletKind {
    fn lowpass(self) -> Vec<f64> {
        match self {
            WaveletKind::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            WaveletKind::Daubechies4 => {
                let s3 = 3f64.sqrt();
                let d = 4.0 * std::f64::consts::SQRT_2;
                vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
            }
        }
    }

    fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let n = h.len();
        (0..n)
            .map(|k| if k % 2 == 0 { h[n - 1 - k] } else { -h[n - 1 - k] })
            .collect()
    }
}

impl std::str::FromStr for WaveletKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" => Ok(WaveletKind::Haar),
            "db4" | "daubechies4" | "db2" => Ok(WaveletKind::Daubechies4),
            other => Err(Error::InvalidParameter(format!("unknown wavelet '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletBasis {
    pub kind: WaveletKind,
    pub len: usize,
    pub levels: usize,
}

impl WaveletBasis {
    pub fn new(kind: WaveletKind, len: usize, levels: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let max = len.trailing_zeros() as usize;
        if levels > max {
            return Err(Error::InvalidParameter(format!(
                "{levels} levels exceed log2({len}) = {max}"
            )));
        }
        Ok(Self { kind, len, levels })
    }

    /// Full decomposition, `log2 L` levels.
    pub fn full(kind: WaveletKind, len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        Self::new(kind, len, len.trailing_zeros() as usize)
    }

    /// Coefficient index range of the level-`level` details.
    pub fn detail_range(&self, level: usize) -> std::ops::Range<usize> {
        assert!(level >= 1 && level <= self.levels, "level out of range");
        let n = self.len >> level;
        n..2 * n
    }

    /// Level of coefficient `index`, `0` for the approximation block.
    pub fn level_of(&self, index: usize) -> usize {
        let approx = self.len >> self.levels;
        if index < approx {
            return 0;
        }
        // index in [L/2^j, L/2^(j-1)) belongs to level j.
        let bits = usize::BITS - index.leading_zeros();
        self.len.trailing_zeros() as usize + 1 - bits as usize
    }

    /// The synthesis atom for coefficient `index`.
    pub fn atom(&self, index: usize) -> Result<Vec<f64>> {
        if index >= self.len {
            return Err(Error::IndexOutOfRange { index, len: self.len });
        }
        let mut c = vec![0.0; self.len];
        c[index] = 1.0;
        idwt(&c, self)
    }
}

fn check(x: &[f64], basis: &WaveletBasis) -> Result<()> {
    if !x.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(x.len()));
    }
    if x.len() != basis.len {
        return Err(Error::LengthMismatch {
            expected: basis.len,
            actual: x.len(),
        });
    }
    Ok(())
}

pub fn dwt(x: &[f64], basis: &WaveletBasis) -> Result<Vec<f64>> {
    check(x, basis)?;
    let (h, g) = (basis.kind.lowpass(), basis.kind.highpass());
    let mut out = x.to_vec();
    let mut work = vec![0.0; x.len()];
    let mut n = x.len();
    for _ in 0..basis.levels {
        let half = n / 2;
        for i in 0..half {
            let (mut a, mut d) = (0.0, 0.0);
            for k in 0..h.len() {
                let v = out[(2 * i + k) % n];
                a += h[k] * v;
                d += g[k] * v;
            }
            work[i] = a;
            work[half + i] = d;
        }
        out[..n].copy_from_slice(&work[..n]);
        n = half;
    }
    Ok(out)
}

pub fn idwt(c: &[f64], basis: &WaveletBasis) -> Result<Vec<f64>> {
    check(c, basis)?;
    let (h, g) = (basis.kind.lowpass(), basis.kind.highpass());
    let mut out = c.to_vec();
    let mut work = vec![0.0; c.len()];
    let mut n = c.len() >> basis.levels;
    for _ in 0..basis.levels {
        let full = 2 * n;
        work[..full].iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let (a, d) = (out[i], out[n + i]);
            for k in 0..h.len() {
                work[(2 * i + k) % full] += h[k] * a + g[k] * d;
            }
        }
        out[..full].copy_from_slice(&work[..full]);
        n = full;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianStream;

    const KINDS: [WaveletKind; 2] = [WaveletKind::Haar, WaveletKind::Daubechies4];

    #[test]
    fn filters_are_orthonormal() {
        for kind in KINDS {
            let (h, g) = (kind.lowpass(), kind.highpass());
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            assert!((dot(&h, &h) - 1.0).abs() < 1e-15);
            assert!((dot(&g, &g) - 1.0).abs() < 1e-15);
            assert!(dot(&h, &g).abs() < 1e-15);
            assert!((h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_has_no_details() {
        let basis = WaveletBasis::full(WaveletKind::Haar, 16).unwrap();
        let c = dwt(&[2.0; 16], &basis).unwrap();
        assert!((c[0] - 8.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn roundtrip_and_parseval() {
        let mut s = GaussianStream::new(8);
        for kind in KINDS {
            for levels in 0..=6 {
                let basis = WaveletBasis::new(kind, 64, levels).unwrap();
                let x = s.normal_vec(64);
                let c = dwt(&x, &basis).unwrap();
                let back = idwt(&c, &basis).unwrap();
                let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-12);
                let nx: f64 = x.iter().map(|v| v * v).sum();
                let nc: f64 = c.iter().map(|v| v * v).sum();
                assert!((nx - nc).abs() < 1e-10 * nx);
            }
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(matches!(WaveletBasis::full(WaveletKind::Haar, 48), Err(Error::NotPowerOfTwo(48))));
        assert!(WaveletBasis::new(WaveletKind::Haar, 16, 5).is_err());
        let basis = WaveletBasis::full(WaveletKind::Haar, 16).unwrap();
        assert!(dwt(&[0.0; 12], &basis).is_err());
        assert!(dwt(&[0.0; 8], &basis).is_err());
    }

    #[test]
    fn levels_and_ranges() {
        let basis = WaveletBasis::full(WaveletKind::Haar, 16).unwrap();
        assert_eq!(basis.detail_range(1), 8..16);
        assert_eq!(basis.detail_range(4), 1..2);
        assert_eq!(basis.level_of(0), 0);
        assert_eq!(basis.level_of(1), 4);
        assert_eq!(basis.level_of(3), 3);
        assert_eq!(basis.level_of(15), 1);
        let partial = WaveletBasis::new(WaveletKind::Haar, 16, 2).unwrap();
        assert_eq!(partial.level_of(3), 0);
        assert_eq!(partial.level_of(4), 2);
    }

    #[test]
    fn haar_finest_atom() {
        let basis = WaveletBasis::full(WaveletKind::Haar, 8).unwrap();
        let atom = basis.atom(4).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [r, -r, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (a, e) in atom.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }
}
