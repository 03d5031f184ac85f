//! Unnormalized discrete Fourier transforms of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 butterfly; every other
//! length goes through Bluestein's chirp-z reformulation on top of a
//! power-of-two transform. Plans are immutable and can be shared between
//! threads; scratch space is allocated per call.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::plane::{ComplexPlane, RealPlane};
use crate::{Error, Result};

/// Largest imaginary part (relative to the largest real magnitude, floored
/// at 1) that [`Fft2::inverse_real`] silently discards.
pub const IMAG_RESIDUE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
enum Algorithm {
    Identity,
    Radix2 {
        twiddles: Vec<Complex64>,
        bit_reverse: Vec<usize>,
    },
    Bluestein {
        chirp: Vec<Complex64>,
        kernel_spectrum: Vec<Complex64>,
        inner: Box<Fft1d>,
    },
}

/// Precomputed 1-D transform plan.
#[derive(Debug, Clone)]
pub struct Fft1d {
    len: usize,
    algorithm: Algorithm,
}

fn unit(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

impl Fft1d {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Dimension { width: 0, height: 1 });
        }
        let algorithm = if len == 1 {
            Algorithm::Identity
        } else if len.is_power_of_two() {
            Self::radix2(len)
        } else {
            Self::bluestein(len)?
        };
        Ok(Self { len, algorithm })
    }

    fn radix2(len: usize) -> Algorithm {
        let twiddles = (0..len / 2)
            .map(|k| unit(-2.0 * PI * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let bit_reverse = (0..len)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        Algorithm::Radix2 {
            twiddles,
            bit_reverse,
        }
    }

    fn bluestein(len: usize) -> Result<Algorithm> {
        let m = (2 * len - 1).next_power_of_two();
        let inner = Fft1d::new(m)?;
        // k^2 mod 2n keeps the chirp phase small for long transforms.
        let modulus = 2 * len as u128;
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                let k2 = (k as u128 * k as u128) % modulus;
                unit(-PI * k2 as f64 / len as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Ok(Algorithm::Bluestein {
            chirp,
            kernel_spectrum: kernel,
            inner: Box::new(inner),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform, `X[k] = sum_n x[n] e^{-2 pi i k n / N}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        match &self.algorithm {
            Algorithm::Identity => {}
            Algorithm::Radix2 {
                twiddles,
                bit_reverse,
            } => radix2_in_place(buf, twiddles, bit_reverse),
            Algorithm::Bluestein {
                chirp,
                kernel_spectrum,
                inner,
            } => {
                let m = inner.len();
                let mut work = vec![Complex64::new(0.0, 0.0); m];
                for ((w, x), c) in work.iter_mut().zip(buf.iter()).zip(chirp) {
                    *w = x * c;
                }
                inner.forward(&mut work);
                for (w, k) in work.iter_mut().zip(kernel_spectrum) {
                    *w *= k;
                }
                inner.inverse(&mut work);
                let scale = 1.0 / m as f64;
                for ((x, w), c) in buf.iter_mut().zip(&work).zip(chirp) {
                    *x = w * c * scale;
                }
            }
        }
    }

    /// In-place inverse transform without the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        for v in buf.iter_mut() {
            *v = v.conj();
        }
    }
}

fn radix2_in_place(buf: &mut [Complex64], twiddles: &[Complex64], bit_reverse: &[usize]) {
    let n = buf.len();
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
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k * stride];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        size *= 2;
    }
}

/// Row/column 2-D transform plan for a fixed `width x height` grid.
#[derive(Debug, Clone)]
pub struct Fft2 {
    rows: Fft1d,
    cols: Fft1d,
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension { width, height });
        }
        Ok(Self {
            rows: Fft1d::new(width)?,
            cols: Fft1d::new(height)?,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    fn check<T: Copy + Default>(&self, plane: &super::Plane<T>) -> Result<()> {
        if plane.width() != self.rows.len() || plane.height() != self.cols.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "plane {}x{} given to a {}x{} transform",
                plane.width(),
                plane.height(),
                self.rows.len(),
                self.cols.len()
            )));
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (w, h) = self.dims();
        for row in data.chunks_exact_mut(w) {
            if inverse {
                self.rows.inverse(row);
            } else {
                self.rows.forward(row);
            }
        }
        if h > 1 {
            let mut column = vec![Complex64::new(0.0, 0.0); h];
            for x in 0..w {
                for (y, c) in column.iter_mut().enumerate() {
                    *c = data[y * w + x];
                }
                if inverse {
                    self.cols.inverse(&mut column);
                } else {
                    self.cols.forward(&mut column);
                }
                for (y, c) in column.iter().enumerate() {
                    data[y * w + x] = *c;
                }
            }
        }
    }

    pub fn forward(&self, plane: &RealPlane) -> Result<ComplexPlane> {
        self.check(plane)?;
        let mut out = plane.map(|v| Complex64::new(v, 0.0));
        self.transform(out.data_mut(), false);
        Ok(out)
    }

    pub fn forward_complex(&self, plane: &ComplexPlane) -> Result<ComplexPlane> {
        self.check(plane)?;
        let mut out = plane.clone();
        self.transform(out.data_mut(), false);
        Ok(out)
    }

    /// Normalized inverse transform (includes the `1/(W*H)` factor).
    pub fn inverse(&self, spectrum: &ComplexPlane) -> Result<ComplexPlane> {
        self.check(spectrum)?;
        let mut out = spectrum.clone();
        self.transform(out.data_mut(), true);
        let scale = 1.0 / out.len() as f64;
        for v in out.data_mut() {
            *v *= scale;
        }
        Ok(out)
    }

    /// Normalized inverse transform of a spectrum that should describe a
    /// real signal. Fails when the imaginary residue is not negligible.
    pub fn inverse_real(&self, spectrum: &ComplexPlane) -> Result<RealPlane> {
        let full = self.inverse(spectrum)?;
        let mut max_real = 1.0f64;
        let mut max_imag = 0.0f64;
        for v in full.data() {
            max_real = max_real.max(libm::fabs(v.re));
            max_imag = max_imag.max(libm::fabs(v.im));
        }
        if max_imag.is_nan() || max_imag > IMAG_RESIDUE_TOLERANCE * max_real {
            return Err(Error::NumericConsistency { residue: max_imag });
        }
        Ok(full.map(|v| v.re))
    }
}

/// Unnormalized forward 2-D DFT of a real plane.
pub fn fft2(plane: &RealPlane) -> Result<ComplexPlane> {
    Fft2::new(plane.width(), plane.height())?.forward(plane)
}

/// Normalized inverse 2-D DFT returning the real part after checking that
/// the imaginary residue is below [`IMAG_RESIDUE_TOLERANCE`].
pub fn ifft2(spectrum: &ComplexPlane) -> Result<RealPlane> {
    Fft2::new(spectrum.width(), spectrum.height())?.inverse_real(spectrum)
}
