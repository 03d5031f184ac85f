//! Windowed feature patches around a target box.
//!
//! The extraction window is the target box inflated by the padding factor
//! about its center. It is sampled onto a fixed feature grid (bilinear,
//! replicate borders), converted to gray, shifted to zero mean by
//! subtracting 0.5 and multiplied by a Hann window.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::annotation::BoundingBox;
use crate::imgproc::{hann_window, Frame, RealPlane};
use crate::tracker::TrackerParams;
use crate::{Error, Result};

/// Smallest accepted target side in pixels.
pub const MIN_BOX_SIDE: f64 = 2.0;
/// Smallest feature-grid side in cells.
pub const MIN_GRID_SIDE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePatch {
    width: usize,
    height: usize,
    cell_size: f64,
    planes: Vec<RealPlane>,
}

impl FeaturePatch {
    pub fn new(planes: Vec<RealPlane>, cell_size: f64) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::DimensionMismatch("feature patch without channels".into()))?;
        let (width, height) = first.dims();
        if planes.iter().any(|p| p.dims() != (width, height)) {
            return Err(Error::DimensionMismatch("feature planes differ in size".into()));
        }
        Ok(Self {
            width,
            height,
            cell_size,
            planes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    /// Pixels per feature cell along x.
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn planes(&self) -> &[RealPlane] {
        &self.planes
    }

    pub fn same_geometry(&self, other: &FeaturePatch) -> bool {
        self.dims() == other.dims() && self.channels() == other.channels()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.planes.iter().map(RealPlane::sum_of_squares).sum()
    }

    /// `(1 - rate) * self + rate * other`, plane by plane.
    pub fn blend(&mut self, other: &FeaturePatch, rate: f64) {
        for (mine, theirs) in self.planes.iter_mut().zip(&other.planes) {
            for (a, b) in mine.data_mut().iter_mut().zip(theirs.data()) {
                *a = (1.0 - rate) * *a + rate * b;
            }
        }
    }
}

/// Extraction window and feature grid for one target box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchGeometry {
    pub target: BoundingBox,
    pub padding: f64,
    pub window: BoundingBox,
    pub grid: (usize, usize),
}

fn round_even(v: f64) -> usize {
    let half = libm::round(v / 2.0);
    (half as usize * 2).max(MIN_GRID_SIDE)
}

/// Feature-grid size for a target: the longer window side maps to
/// `template_longest_side` cells, the other side keeps the aspect ratio, and
/// both are rounded to even counts.
pub fn template_grid(target_w: f64, target_h: f64, params: &TrackerParams) -> (usize, usize) {
    let longest = params.template_longest_side as f64;
    if target_w >= target_h {
        (round_even(longest), round_even(longest * target_h / target_w))
    } else {
        (round_even(longest * target_w / target_h), round_even(longest))
    }
}

fn check_box(bbox: &BoundingBox) -> Result<()> {
    if !bbox.is_finite() || bbox.w < MIN_BOX_SIDE || bbox.h < MIN_BOX_SIDE {
        return Err(Error::Geometry(format!(
            "degenerate box {}x{} (sides must be at least {MIN_BOX_SIDE} px)",
            bbox.w, bbox.h
        )));
    }
    Ok(())
}

fn check_center(frame: &Frame, bbox: &BoundingBox) -> Result<()> {
    let (cx, cy) = bbox.center();
    if !(0.0..=frame.width() as f64).contains(&cx) || !(0.0..=frame.height() as f64).contains(&cy) {
        return Err(Error::Geometry(format!(
            "box center ({cx}, {cy}) outside the {}x{} frame",
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

impl PatchGeometry {
    pub fn for_box(bbox: BoundingBox, params: &TrackerParams) -> Result<Self> {
        check_box(&bbox)?;
        let grid = template_grid(bbox.w * params.padding, bbox.h * params.padding, params);
        Ok(Self::with_grid(bbox, params.padding, grid))
    }

    pub fn with_grid(target: BoundingBox, padding: f64, grid: (usize, usize)) -> Self {
        let (cx, cy) = target.center();
        Self {
            target,
            padding,
            window: BoundingBox::from_center(cx, cy, target.w * padding, target.h * padding),
            grid,
        }
    }

    /// Window pixels per cell along x and y.
    pub fn cell_dims(&self) -> (f64, f64) {
        (self.window.w / self.grid.0 as f64, self.window.h / self.grid.1 as f64)
    }
}

/// Samples a window onto a grid; `hann` must match the grid size.
pub(crate) fn sample_window(frame: &Frame, window: &BoundingBox, hann: &RealPlane) -> FeaturePatch {
    let (gw, gh) = hann.dims();
    let step_x = window.w / gw as f64;
    let step_y = window.h / gh as f64;
    let xs: Vec<(isize, f64)> = (0..gw)
        .map(|i| split(window.x + (i as f64 + 0.5) * step_x - 0.5))
        .collect();
    let mut data = vec![0.0; gw * gh];
    for j in 0..gh {
        let (y0, fy) = split(window.y + (j as f64 + 0.5) * step_y - 0.5);
        for (i, &(x0, fx)) in xs.iter().enumerate() {
            let top = (1.0 - fx) * frame.gray_clamped(x0, y0) + fx * frame.gray_clamped(x0 + 1, y0);
            let bottom = (1.0 - fx) * frame.gray_clamped(x0, y0 + 1) + fx * frame.gray_clamped(x0 + 1, y0 + 1);
            let gray = (1.0 - fy) * top + fy * bottom;
            data[j * gw + i] = (gray - 0.5) * hann.get(i, j);
        }
    }
    let plane = RealPlane::new(gw, gh, data).expect("grid dims match the window buffer");
    FeaturePatch {
        width: gw,
        height: gh,
        cell_size: step_x,
        planes: vec![plane],
    }
}

#[inline]
fn split(coord: f64) -> (isize, f64) {
    let base = libm::floor(coord);
    (base as isize, coord - base)
}

/// Patch for a geometry whose target center must lie inside the frame.
pub fn extract_window(frame: &Frame, geometry: &PatchGeometry) -> Result<FeaturePatch> {
    check_center(frame, &geometry.target)?;
    let hann = hann_window(geometry.grid.0, geometry.grid.1);
    Ok(sample_window(frame, &geometry.window, &hann))
}

/// Windowed gray patch around `bbox` on the template grid for `params`.
pub fn extract_patch(frame: &Frame, bbox: BoundingBox, params: &TrackerParams) -> Result<FeaturePatch> {
    let geometry = PatchGeometry::for_box(bbox, params)?;
    extract_window(frame, &geometry)
}
