//! Unitary DFT, circular convolution and Gaussian ideal low-pass filters.
//!
//! Index convention: the DFT rows are
//! `f_l[j] = L^(-1/2) exp(-2 pi i j l / L)` with 0-based sample index
//! `j = k - 1` and 0-based frequency bin `l`. A 1-based row index `l` in
//! `1..=L` maps to bin `l mod L`, so the row written `f_L` is bin 0 (DC).

use crate::{Error, Result, C64};

#[derive(Clone, Debug)]
enum Algorithm {
    Radix2 { bit_reverse: Vec<usize> },
    Direct,
}

/// Precomputed twiddles for a unitary DFT of fixed length.
///
/// Power-of-two lengths use an iterative radix-2 FFT, every other length
/// falls back to direct `O(L^2)` summation against the twiddle table.
#[derive(Clone, Debug)]
pub struct DftPlan {
    len: usize,
    scale: f64,
    /// `exp(-2 pi i j / L)` for `j` in `0..L`.
    twiddles: Vec<C64>,
    algorithm: Algorithm,
}

impl DftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyInput);
        }
        let twiddles = (0..len)
            .map(|j| C64::from_polar(1.0, -std::f64::consts::TAU * j as f64 / len as f64))
            .collect();
        let algorithm = if len.is_power_of_two() {
            let bits = len.trailing_zeros();
            let bit_reverse = (0..len)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect();
            Algorithm::Radix2 { bit_reverse }
        } else {
            Algorithm::Direct
        };
        Ok(Self {
            len,
            scale: 1.0 / (len as f64).sqrt(),
            twiddles,
            algorithm,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place unitary forward transform.
    pub fn forward(&self, buf: &mut [C64]) {
        self.transform(buf, false);
    }

    /// In-place unitary inverse transform.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.transform(buf, true);
    }

    fn twiddle(&self, index: usize, inverse: bool) -> C64 {
        let w = self.twiddles[index];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    fn transform(&self, buf: &mut [C64], inverse: bool) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        let n = self.len;
        match &self.algorithm {
            Algorithm::Radix2 { bit_reverse } => {
                for (i, &j) in bit_reverse.iter().enumerate() {
                    if i < j {
                        buf.swap(i, j);
                    }
                }
                let mut size = 2;
                while size <= n {
                    let half = size / 2;
                    let stride = n / size;
                    for start in (0..n).step_by(size) {
                        for k in 0..half {
                            let w = self.twiddle(k * stride, inverse);
                            let u = buf[start + k];
                            let v = buf[start + k + half] * w;
                            buf[start + k] = u + v;
                            buf[start + k + half] = u - v;
                        }
                    }
                    size *= 2;
                }
                for x in buf.iter_mut() {
                    *x *= self.scale;
                }
            }
            Algorithm::Direct => {
                let input = buf.to_vec();
                for (l, out) in buf.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, &x) in input.iter().enumerate() {
                        acc += x * self.twiddle((l * j) % n, inverse);
                    }
                    *out = acc * self.scale;
                }
            }
        }
    }
}

/// Unitary DFT `F x`.
pub fn dft(x: &[C64]) -> Result<Vec<C64>> {
    let plan = DftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out);
    Ok(out)
}

/// Unitary inverse DFT `F* X`.
pub fn idft(x: &[C64]) -> Result<Vec<C64>> {
    let plan = DftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse(&mut out);
    Ok(out)
}

/// Row `f_l` of the DFT matrix for 0-based bin `l < len`.
pub fn dft_row(bin: usize, len: usize) -> Result<Vec<C64>> {
    if len == 0 {
        return Err(Error::EmptyInput);
    }
    if bin >= len {
        return Err(Error::IndexOutOfRange { index: bin, len });
    }
    let scale = 1.0 / (len as f64).sqrt();
    Ok((0..len)
        .map(|j| {
            let phase = -std::f64::consts::TAU * ((j * bin) % len) as f64 / len as f64;
            C64::from_polar(scale, phase)
        })
        .collect())
}

/// Circular convolution `y[l] = sum_j h[j] x[(l - j) mod L]`, computed through
/// the Fourier domain: `y = sqrt(L) F*(F h . F x)`.
pub fn circular_convolve(h: &[C64], x: &[C64]) -> Result<Vec<C64>> {
    if h.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            actual: x.len(),
        });
    }
    let plan = DftPlan::new(h.len())?;
    let mut hf = h.to_vec();
    let mut xf = x.to_vec();
    plan.forward(&mut hf);
    plan.forward(&mut xf);
    let root = (h.len() as f64).sqrt();
    let mut out: Vec<C64> = hf.iter().zip(&xf).map(|(a, b)| a * b * root).collect();
    plan.inverse(&mut out);
    Ok(out)
}

/// Circular distance of bin `bin` from DC.
pub fn bin_distance(bin: usize, len: usize) -> usize {
    bin.min(len - bin)
}

/// Parameters of a Gaussian ideal low-pass filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec {
    pub len: usize,
    /// Standard deviation of the Fourier-domain Gaussian, in bins.
    pub width: f64,
    /// Bins with circular distance from DC above the cutoff are zeroed.
    pub cutoff: usize,
}

impl FilterSpec {
    pub fn new(len: usize, width: f64, cutoff: usize) -> Result<Self> {
        let spec = Self { len, width, cutoff };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::EmptyInput);
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian width must be positive and finite, got {}",
                self.width
            )));
        }
        if self.cutoff > self.len / 2 {
            return Err(Error::InvalidParameter(format!(
                "cutoff {} exceeds L/2 = {}",
                self.cutoff,
                self.len / 2
            )));
        }
        Ok(())
    }

    pub fn in_band(&self, bin: usize) -> bool {
        bin_distance(bin, self.len) <= self.cutoff
    }

    /// Indices of the pass band.
    pub fn band(&self) -> Vec<usize> {
        (0..self.len).filter(|&b| self.in_band(b)).collect()
    }
}

/// A low-pass filter in both domains.
///
/// `spectrum` is the unitary DFT of `time` with the out-of-band bins stored
/// as exact zeros; transforming `time` numerically reproduces them only up
/// to rounding.
#[derive(Clone, Debug)]
pub struct LowpassFilter {
    pub spec: FilterSpec,
    pub time: Vec<C64>,
    pub spectrum: Vec<C64>,
}

/// Gaussian profile `exp(-w^2 / (2 s^2))` inside the band, zero outside,
/// normalized to a unit-norm time-domain filter.
pub fn lowpass_gaussian(spec: FilterSpec) -> Result<LowpassFilter> {
    spec.validate()?;
    let mut spectrum: Vec<C64> = (0..spec.len)
        .map(|bin| {
            if spec.in_band(bin) {
                let w = bin_distance(bin, spec.len) as f64;
                C64::new((-w * w / (2.0 * spec.width * spec.width)).exp(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    // Unitary transform: normalizing the spectrum normalizes the filter.
    let norm = spectrum.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in spectrum.iter_mut() {
        *z /= norm;
    }
    let time = idft(&spectrum)?;
    Ok(LowpassFilter {
        spec,
        time,
        spectrum,
    })
}

/// Euclidean norm of a complex slice.
pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Lift a real slice into complex values.
pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}
