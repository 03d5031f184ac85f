//! Image buffers, 2-D FFT, window functions and interpolation kernels.

mod fft;
mod frame;
mod plane;
mod resample;
mod window;

pub use fft::{fft2, ifft2, Fft1d, Fft2, IMAG_RESIDUE_TOLERANCE};
pub use frame::{Frame, LUMA_WEIGHTS};
pub use plane::{ComplexPlane, Plane, RealPlane};
pub use resample::{bicubic_resample, bicubic_resample_scaled, cubic_kernel, cubic_weights, BICUBIC_A};
pub use window::{hann_1d, hann_window};
