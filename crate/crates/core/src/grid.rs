//! Raster geometry shared by tissue maps, velocity maps, travel-time maps and
//! images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Side length of the square scene domain, m.
pub const SCENE_SIZE: f64 = 0.20;

/// Pixels per side of a backprojected image.
pub const IMAGE_PIXELS: usize = 256;

/// A uniform 2-D raster. `origin` is the lower-left corner of cell (0, 0);
/// cells are stored row-major with the row index increasing along +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterGeometry {
    pub nx: usize,
    pub ny: usize,
    pub cell_size: f64,
    pub origin: (f64, f64),
}

impl RasterGeometry {
    pub fn new(nx: usize, ny: usize, cell_size: f64, origin: (f64, f64)) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("raster must have at least one cell".into()));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            cell_size,
            origin,
        })
    }

    /// `n`×`n` square raster covering the 20 cm scene domain centred on the
    /// origin.
    pub fn scene(n: usize) -> Self {
        let h = SCENE_SIZE / n as f64;
        Self {
            nx: n,
            ny: n,
            cell_size: h,
            origin: (-SCENE_SIZE / 2.0, -SCENE_SIZE / 2.0),
        }
    }

    /// The 256×256 backprojection image grid (0.78125 mm pixels).
    pub fn image() -> Self {
        Self::scene(IMAGE_PIXELS)
    }

    /// Scene raster with the given nominal cell size, rounded to a whole number
    /// of cells across the domain.
    pub fn scene_with_cell(cell_size: f64) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        let n = (SCENE_SIZE / cell_size).round().max(1.0) as usize;
        Ok(Self::scene(n))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.nx + col
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.cell_size,
            self.origin.1 + (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.cell_size
    }

    /// Cell containing the point, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin.0) / self.cell_size;
        let fy = (y - self.origin.1) / self.cell_size;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (col, row) = (fx.floor() as usize, fy.floor() as usize);
        (col < self.nx && row < self.ny).then_some((col, row))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.locate(x, y).is_some()
    }

    /// Iterator over all cell centres in storage order.
    pub fn centers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny).flat_map(move |row| (0..self.nx).map(move |col| self.cell_center(col, row)))
    }

    /// True when both rasters describe the same cells (up to rounding in the
    /// cell size and origin).
    pub fn same_as(&self, other: &RasterGeometry) -> bool {
        let tol = 1e-9 * self.cell_size.max(other.cell_size);
        self.nx == other.nx
            && self.ny == other.ny
            && (self.cell_size - other.cell_size).abs() <= tol
            && (self.origin.0 - other.origin.0).abs() <= tol
            && (self.origin.1 - other.origin.1).abs() <= tol
    }
}
