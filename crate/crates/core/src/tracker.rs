//! Kernelized correlation-filter tracker with an optional scale pool.
//!
//! The filter is a kernel ridge regression over every circular shift of the
//! template patch. Circulant data matrices are diagonalized by the DFT, so
//! training and detection reduce to elementwise products of spectra:
//!
//! * training: `alphaf = yf / (kf_xx + lambda)`
//! * detection: `response = ifft2(kf_xz * alphaf)`
//!
//! where `kf_ab` is the spectrum of the Gaussian kernel correlation between
//! two patches and `yf` the spectrum of a Gaussian label peaked at the
//! origin. A scale pool with more than one entry turns the tracker into the
//! scale-adaptive variant: each candidate scale is evaluated on its own
//! window and non-unit scales pay a multiplicative penalty.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::annotation::BoundingBox;
use crate::failure::{self, ConfidenceRecord, TrackStatus};
use crate::features::{sample_window, FeaturePatch, PatchGeometry};
use crate::imgproc::{hann_window, ComplexPlane, Fft2, Frame, RealPlane};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    #[default]
    Gray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    /// Ridge regularization.
    pub lambda: f64,
    /// Gaussian kernel bandwidth.
    pub kernel_sigma: f64,
    /// Label bandwidth relative to `sqrt(w * h)` of the target in cells.
    pub label_sigma_factor: f64,
    /// Model interpolation rate.
    pub interp_factor: f64,
    /// Extraction window size relative to the target box.
    pub padding: f64,
    /// Cells along the longer side of the feature grid.
    pub template_longest_side: usize,
    /// Relative scales evaluated per frame; `[1.0]` is plain KCF.
    pub scale_pool: Vec<f64>,
    /// Factor applied to the response peak of every non-unit scale.
    pub scale_penalty: f64,
    pub features: FeatureKind,
}

impl TrackerParams {
    /// Fixed-scale tracker defaults.
    pub fn kcf() -> Self {
        Self {
            lambda: 1e-4,
            kernel_sigma: 0.5,
            label_sigma_factor: 0.1,
            interp_factor: 0.02,
            padding: 2.0,
            template_longest_side: 64,
            scale_pool: vec![1.0],
            scale_penalty: 0.975,
            features: FeatureKind::Gray,
        }
    }

    /// Scale-pool tracker defaults.
    pub fn samf() -> Self {
        Self {
            scale_pool: vec![0.985, 0.99, 0.995, 1.0, 1.005, 1.01, 1.015],
            ..Self::kcf()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("tracker {what}")));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if !(self.kernel_sigma > 0.0 && self.kernel_sigma.is_finite()) {
            return bad("kernel_sigma must be positive");
        }
        if !(self.label_sigma_factor > 0.0 && self.label_sigma_factor.is_finite()) {
            return bad("label_sigma_factor must be positive");
        }
        if !(self.interp_factor > 0.0 && self.interp_factor <= 1.0) {
            return bad("interp_factor must lie in (0, 1]");
        }
        if !(self.padding >= 1.0 && self.padding.is_finite()) {
            return bad("padding must be at least 1");
        }
        if self.template_longest_side < crate::features::MIN_GRID_SIDE {
            return bad("template_longest_side is too small");
        }
        if !self.scale_pool.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return bad("scale_pool entries must be positive");
        }
        if !self.scale_pool.contains(&1.0) {
            return bad("scale_pool must contain 1.0");
        }
        if !(self.scale_penalty > 0.0 && self.scale_penalty <= 1.0) {
            return bad("scale_penalty must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn is_scale_adaptive(&self) -> bool {
        self.scale_pool.len() > 1
    }
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self::kcf()
    }
}

/// Correlation scores for every circular shift of the template.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub plane: RealPlane,
    pub peak: f64,
    pub peak_cell: (usize, usize),
    /// Signed, sub-cell refined displacement of the peak in cells.
    pub shift: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub scale: f64,
    pub response: ResponseMap,
    /// Peak after the scale penalty; used to rank candidate scales.
    pub score: f64,
    /// The proposed center fell outside the frame and was clamped.
    pub clamped: bool,
}

/// Output of closed-form training on one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub alphaf: ComplexPlane,
    pub label_peak: f64,
}

/// Gaussian regression target of the given bandwidth, peaked at the origin
/// with circular wrap-around.
pub fn gaussian_label(width: usize, height: usize, sigma: f64) -> Result<RealPlane> {
    let signed = |i: usize, n: usize| -> f64 {
        if i <= n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        }
    };
    let denom = 2.0 * sigma * sigma;
    RealPlane::from_fn(width, height, |x, y| {
        let dx = signed(x, width);
        let dy = signed(y, height);
        libm::exp(-(dx * dx + dy * dy) / denom)
    })
}

fn label_sigma(grid: (usize, usize), params: &TrackerParams) -> f64 {
    let tw = grid.0 as f64 / params.padding;
    let th = grid.1 as f64 / params.padding;
    libm::sqrt(tw * th) * params.label_sigma_factor
}

#[derive(Debug, Clone)]
struct Spectra {
    planes: Vec<ComplexPlane>,
    norm: f64,
}

fn spectra(fft: &Fft2, patch: &FeaturePatch) -> Result<Spectra> {
    let planes = patch.planes().iter().map(|p| fft.forward(p)).collect::<Result<Vec<_>>>()?;
    Ok(Spectra {
        planes,
        norm: patch.sum_of_squares(),
    })
}

/// Kernel values `k(tau)` for every circular shift, from precomputed spectra.
fn kernel_from_spectra(fft: &Fft2, a: &Spectra, b: &Spectra, sigma: f64) -> Result<RealPlane> {
    let (w, h) = fft.dims();
    let mut cross = ComplexPlane::zeros(w, h)?;
    for (pa, pb) in a.planes.iter().zip(&b.planes) {
        for ((acc, x), y) in cross.data_mut().iter_mut().zip(pa.data()).zip(pb.data()) {
            *acc += x.conj() * y;
        }
    }
    let correlation = fft.inverse_real(&cross)?;
    let n = (w * h * a.planes.len()) as f64;
    let scale = 1.0 / (sigma * sigma * n);
    let norms = a.norm + b.norm;
    Ok(correlation.map(|c| libm::exp(-(norms - 2.0 * c).max(0.0) * scale)))
}

/// Gaussian kernel correlation of two patches over all circular shifts of
/// `b` relative to `a`.
pub fn gaussian_correlation(a: &FeaturePatch, b: &FeaturePatch, sigma: f64) -> Result<RealPlane> {
    if !a.same_geometry(b) {
        return Err(Error::DimensionMismatch(format!(
            "patches {}x{}x{} and {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let fft = Fft2::new(a.width(), a.height())?;
    kernel_from_spectra(&fft, &spectra(&fft, a)?, &spectra(&fft, b)?, sigma)
}

fn solve(fft: &Fft2, x: &Spectra, label_spectrum: &ComplexPlane, params: &TrackerParams) -> Result<ComplexPlane> {
    let kf = fft.forward(&kernel_from_spectra(fft, x, x, params.kernel_sigma)?)?;
    let data = label_spectrum
        .data()
        .iter()
        .zip(kf.data())
        .map(|(y, k)| y / (k + params.lambda))
        .collect();
    ComplexPlane::new(kf.width(), kf.height(), data)
}

/// Closed-form kernel ridge regression on one windowed patch.
pub fn train(patch: &FeaturePatch, params: &TrackerParams) -> Result<TrainedModel> {
    params.validate()?;
    let fft = Fft2::new(patch.width(), patch.height())?;
    let label = gaussian_label(patch.width(), patch.height(), label_sigma(patch.dims(), params))?;
    let label_peak = label.argmax().2;
    let yf = fft.forward(&label)?;
    let alphaf = solve(&fft, &spectra(&fft, patch)?, &yf, params)?;
    Ok(TrainedModel { alphaf, label_peak })
}

/// Offset of a parabola vertex through three equally spaced samples.
fn parabola_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom < 0.0 {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

fn response_map(plane: RealPlane) -> ResponseMap {
    let (w, h) = plane.dims();
    let (px, py, peak) = plane.argmax();
    let dx = parabola_offset(plane.get((px + w - 1) % w, py), peak, plane.get((px + 1) % w, py));
    let dy = parabola_offset(plane.get(px, (py + h - 1) % h), peak, plane.get(px, (py + 1) % h));
    let wrap = |p: usize, n: usize| if p > n / 2 { p as f64 - n as f64 } else { p as f64 };
    let shift = (
        if w > 2 { wrap(px, w) + dx } else { wrap(px, w) },
        if h > 2 { wrap(py, h) + dy } else { wrap(py, h) },
    );
    ResponseMap {
        plane,
        peak,
        peak_cell: (px, py),
        shift,
    }
}

/// Single-target tracker: learned model, template and response history.
#[derive(Debug, Clone)]
pub struct TrackerState {
    params: TrackerParams,
    fft: Fft2,
    hann: RealPlane,
    label_spectrum: ComplexPlane,
    grid: (usize, usize),
    bbox: BoundingBox,
    alphaf: ComplexPlane,
    template: FeaturePatch,
    template_spectra: Spectra,
    first_response_max: Option<f64>,
    last_response_max: Option<f64>,
    status: TrackStatus,
}

impl TrackerState {
    /// Trains a fresh tracker on `bbox` in `frame`.
    pub fn init(frame: &Frame, bbox: BoundingBox, params: TrackerParams) -> Result<Self> {
        params.validate()?;
        let geometry = PatchGeometry::for_box(bbox, &params)?;
        let patch = crate::features::extract_window(frame, &geometry)?;
        let (gw, gh) = geometry.grid;
        let fft = Fft2::new(gw, gh)?;
        let hann = hann_window(gw, gh);
        let label = gaussian_label(gw, gh, label_sigma(geometry.grid, &params))?;
        let label_spectrum = fft.forward(&label)?;
        let template_spectra = spectra(&fft, &patch)?;
        let alphaf = solve(&fft, &template_spectra, &label_spectrum, &params)?;
        Ok(Self {
            params,
            fft,
            hann,
            label_spectrum,
            grid: geometry.grid,
            bbox,
            alphaf,
            template: patch,
            template_spectra,
            first_response_max: None,
            last_response_max: None,
            status: TrackStatus::Active,
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn alphaf(&self) -> &ComplexPlane {
        &self.alphaf
    }

    pub fn template(&self) -> &FeaturePatch {
        &self.template
    }

    /// Response peak of the first detection after initialization.
    pub fn first_response_max(&self) -> Option<f64> {
        self.first_response_max
    }

    pub fn last_response_max(&self) -> Option<f64> {
        self.last_response_max
    }

    fn window_for(&self, scale: f64) -> BoundingBox {
        let (cx, cy) = self.bbox.center();
        BoundingBox::from_center(
            cx,
            cy,
            self.bbox.w * scale * self.params.padding,
            self.bbox.h * scale * self.params.padding,
        )
    }

    /// Patch on the model grid for a window in `frame`.
    pub fn sample(&self, frame: &Frame, window: &BoundingBox) -> FeaturePatch {
        sample_window(frame, window, &self.hann)
    }

    /// Response of the current model to an already extracted patch.
    pub fn respond(&self, patch: &FeaturePatch) -> Result<ResponseMap> {
        if !patch.same_geometry(&self.template) {
            return Err(Error::DimensionMismatch("patch does not match the model grid".into()));
        }
        let z = spectra(&self.fft, patch)?;
        let kf = self
            .fft
            .forward(&kernel_from_spectra(&self.fft, &self.template_spectra, &z, self.params.kernel_sigma)?)?;
        let product = ComplexPlane::new(
            kf.width(),
            kf.height(),
            kf.data().iter().zip(self.alphaf.data()).map(|(k, a)| k * a).collect(),
        )?;
        Ok(response_map(self.fft.inverse_real(&product)?))
    }

    /// Locates the target in `frame` around the previous box.
    pub fn detect(&self, frame: &Frame) -> Result<Detection> {
        if self.status == TrackStatus::Stopped {
            return Err(Error::TrackerStopped);
        }
        let mut best: Option<(f64, f64, ResponseMap)> = None;
        // Unit scale first so it wins exact ties.
        let scales = core::iter::once(1.0).chain(self.params.scale_pool.iter().copied().filter(|&s| s != 1.0));
        for scale in scales {
            let window = self.window_for(scale);
            let response = self.respond(&self.sample(frame, &window))?;
            let score = if scale == 1.0 {
                response.peak
            } else {
                response.peak * self.params.scale_penalty
            };
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, scale, response));
            }
        }
        let (score, scale, response) = best.expect("scale pool contains 1.0");
        let window = self.window_for(scale);
        let cell_w = window.w / self.grid.0 as f64;
        let cell_h = window.h / self.grid.1 as f64;
        let (cx, cy) = self.bbox.center();
        let mut nx = cx + response.shift.0 * cell_w;
        let mut ny = cy + response.shift.1 * cell_h;
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        let clamped = !(0.0..=fw).contains(&nx) || !(0.0..=fh).contains(&ny);
        nx = nx.clamp(0.0, fw);
        ny = ny.clamp(0.0, fh);
        let w = (self.bbox.w * scale).max(crate::features::MIN_BOX_SIDE);
        let h = (self.bbox.h * scale).max(crate::features::MIN_BOX_SIDE);
        Ok(Detection {
            bbox: BoundingBox::from_center(nx, ny, w, h),
            scale,
            response,
            score,
            clamped,
        })
    }

    /// Retrains on `accepted_box` and blends the new model in at the
    /// interpolation rate. Records `response_max` as the latest peak and, on
    /// the first call, as the reference peak.
    pub fn update_with(&mut self, frame: &Frame, accepted_box: BoundingBox, response_max: f64) -> Result<()> {
        if self.status == TrackStatus::Stopped {
            return Err(Error::TrackerStopped);
        }
        if !accepted_box.is_valid() {
            return Err(Error::Geometry(format!("invalid accepted box {accepted_box:?}")));
        }
        let geometry = PatchGeometry::with_grid(accepted_box, self.params.padding, self.grid);
        let patch = self.sample(frame, &geometry.window);
        let x = spectra(&self.fft, &patch)?;
        let fresh = solve(&self.fft, &x, &self.label_spectrum, &self.params)?;
        let rate = self.params.interp_factor;
        blend_complex(self.alphaf.data_mut(), fresh.data(), rate);
        for (mine, theirs) in self.template_spectra.planes.iter_mut().zip(&x.planes) {
            blend_complex(mine.data_mut(), theirs.data(), rate);
        }
        self.template.blend(&patch, rate);
        self.template_spectra.norm = self.template.sum_of_squares();
        self.bbox = accepted_box;
        self.last_response_max = Some(response_max);
        self.first_response_max.get_or_insert(response_max);
        Ok(())
    }

    pub fn update(&mut self, frame: &Frame, detection: &Detection) -> Result<()> {
        self.update_with(frame, detection.bbox, detection.response.peak)
    }

    /// Applies a failure-detection verdict; a failed record stops the tracker
    /// for good.
    pub fn apply_confidence(&mut self, record: &ConfidenceRecord) {
        self.status = failure::apply(self.status, record);
    }
}

fn blend_complex(model: &mut [Complex64], fresh: &[Complex64], rate: f64) {
    for (m, f) in model.iter_mut().zip(fresh) {
        *m = *m * (1.0 - rate) + *f * rate;
    }
}
