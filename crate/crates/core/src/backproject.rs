//! Delay-and-sum image formation.
//!
//! Every pixel sums, over the array elements in index order, the trace value
//! at that pixel's two-way travel time. Times come either from straight rays
//! at one effective permittivity (ToF) or from per-element travel-time maps
//! (CGLI). Amplitudes stay signed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eikonal::TravelTimeMap;
use crate::error::{Error, Result};
use crate::forward::{ArrayGeometry, Sinogram, Trace};
use crate::grid::{RasterGeometry, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Raw,
    MinMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpImage {
    pub geometry: RasterGeometry,
    /// Row-major, row 0 at the bottom.
    pub pixels: Vec<f64>,
    pub normalization: Normalization,
}

impl BpImage {
    pub fn zeros(geometry: &RasterGeometry) -> Self {
        Self {
            geometry: *geometry,
            pixels: vec![0.0; geometry.len()],
            normalization: Normalization::Raw,
        }
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.pixels[self.geometry.index(col, row)]
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest pixel; the first one wins ties.
    pub fn argmax(&self) -> usize {
        self.best_by(|v| v)
    }

    /// Index of the largest |pixel|; the first one wins ties.
    pub fn argmax_abs(&self) -> usize {
        self.best_by(f64::abs)
    }

    fn best_by(&self, key: impl Fn(f64) -> f64) -> usize {
        let mut best = 0;
        for (k, &v) in self.pixels.iter().enumerate() {
            if key(v) > key(self.pixels[best]) {
                best = k;
            }
        }
        best
    }

    /// Centre of pixel `idx` in metres.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        let (c, r) = self.geometry.coords(idx);
        self.geometry.cell_center(c, r)
    }
}

/// Straight-ray two-way time T → r → R at speed c/√eps_e.
pub fn tof_two_way_time(tx: (f64, f64), rx: (f64, f64), r: (f64, f64), eps_e: f64) -> f64 {
    let path = (tx.0 - r.0).hypot(tx.1 - r.1) + (rx.0 - r.0).hypot(rx.1 - r.1);
    path * eps_e.sqrt() / SPEED_OF_LIGHT
}

/// Linear interpolation of the trace at time `t`; zero outside the record.
pub fn interpolate_sample(trace: &Trace, t: f64) -> f64 {
    let n = trace.samples.len();
    if n == 0 {
        return 0.0;
    }
    let u = (t - trace.t0) / trace.dt;
    if !(u >= 0.0 && u <= (n - 1) as f64) {
        return 0.0;
    }
    let k = (u.floor() as usize).min(n - 1);
    if k == n - 1 {
        return trace.samples[k];
    }
    let f = u - k as f64;
    trace.samples[k] * (1.0 - f) + trace.samples[k + 1] * f
}

fn sum_rows(grid: &RasterGeometry, pixel: impl Fn(usize, (f64, f64)) -> f64 + Sync) -> Vec<f64> {
    let mut pixels = vec![0.0; grid.len()];
    pixels.par_chunks_mut(grid.nx).enumerate().for_each(|(row, out)| {
        for (col, v) in out.iter_mut().enumerate() {
            *v = pixel(grid.index(col, row), grid.cell_center(col, row));
        }
    });
    pixels
}

/// Homogeneous straight-ray backprojection at effective permittivity `eps_e`.
pub fn backproject_tof(sino: &Sinogram, geom: &ArrayGeometry, eps_e: f64, grid: &RasterGeometry) -> Result<BpImage> {
    if !(eps_e >= 1.0 && eps_e.is_finite()) {
        return Err(Error::InvalidArgument(format!("effective permittivity {eps_e} must be >= 1")));
    }
    if geom.elements != sino.traces.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} array elements but {} traces",
            geom.elements,
            sino.traces.len()
        )));
    }
    let pairs: Vec<((f64, f64), (f64, f64))> = (0..geom.elements).map(|i| (geom.tx(i), geom.rx(i))).collect();
    let pixels = sum_rows(grid, |_, r| {
        sino.traces
            .iter()
            .zip(&pairs)
            .map(|(trace, &(tx, rx))| interpolate_sample(trace, tof_two_way_time(tx, rx, r, eps_e)))
            .sum()
    });
    Ok(BpImage {
        geometry: *grid,
        pixels,
        normalization: Normalization::Raw,
    })
}

/// Backprojection with per-element two-way travel-time maps.
pub fn backproject_cgli(sino: &Sinogram, ttmaps: &[TravelTimeMap], grid: &RasterGeometry) -> Result<BpImage> {
    if ttmaps.len() != sino.traces.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} travel-time maps for {} traces",
            ttmaps.len(),
            sino.traces.len()
        )));
    }
    if let Some(bad) = ttmaps.iter().position(|m| !m.geometry.same_as(grid) || m.tau.len() != grid.len()) {
        return Err(Error::ShapeMismatch(format!("travel-time map {bad} does not cover the image grid")));
    }
    let pixels = sum_rows(grid, |k, _| {
        sino.traces
            .iter()
            .zip(ttmaps)
            .map(|(trace, map)| interpolate_sample(trace, map.tau[k]))
            .sum()
    });
    Ok(BpImage {
        geometry: *grid,
        pixels,
        normalization: Normalization::Raw,
    })
}

/// Affine rescale to [0, 1]; a constant image becomes all zeros.
pub fn normalize_minmax(img: &BpImage) -> BpImage {
    let (lo, hi) = (img.min(), img.max());
    let span = hi - lo;
    let pixels = if span > 0.0 && span.is_finite() {
        img.pixels.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; img.pixels.len()]
    };
    BpImage {
        geometry: img.geometry,
        pixels,
        normalization: Normalization::MinMax,
    }
}
