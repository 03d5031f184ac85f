use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::plane::RealPlane;

/// Symmetric raised-cosine window with zero endpoints. A length-1 window is
/// `[1.0]`.
pub fn hann_1d(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| 0.5 * (1.0 - libm::cos(2.0 * PI * i as f64 / (n - 1) as f64)))
            .collect(),
    }
}

/// Separable 2-D Hann window. Zero-sized requests are treated as size 1.
pub fn hann_window(width: usize, height: usize) -> RealPlane {
    let wx = hann_1d(width.max(1));
    let wy = hann_1d(height.max(1));
    RealPlane::from_fn(wx.len(), wy.len(), |x, y| wx[x] * wy[y]).expect("window dims are non-zero")
}
