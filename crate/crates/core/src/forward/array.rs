use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RasterGeometry;

/// Circular monostatic array. Element `i` sits at angle 2πi/M on the ring;
/// its transmitter and receiver straddle that point, `d` apart along the
/// ring tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub elements: usize,
    pub ring_radius: f64,
    pub center: (f64, f64),
    /// TX–RX spacing, m.
    pub spacing: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            elements: 24,
            ring_radius: 0.08,
            center: (0.0, 0.0),
            spacing: 4e-3,
        }
    }
}

impl ArrayGeometry {
    pub fn angle(&self, i: usize) -> f64 {
        2.0 * PI * i as f64 / self.elements as f64
    }

    /// Ring position of element `i` (midpoint of its TX/RX pair).
    pub fn position(&self, i: usize) -> (f64, f64) {
        let (s, c) = self.angle(i).sin_cos();
        (
            self.center.0 + self.ring_radius * c,
            self.center.1 + self.ring_radius * s,
        )
    }

    pub fn tx(&self, i: usize) -> (f64, f64) {
        self.offset(i, -0.5)
    }

    pub fn rx(&self, i: usize) -> (f64, f64) {
        self.offset(i, 0.5)
    }

    fn offset(&self, i: usize, sign: f64) -> (f64, f64) {
        let (s, c) = self.angle(i).sin_cos();
        let (px, py) = self.position(i);
        let k = sign * self.spacing;
        (px - k * s, py + k * c)
    }

    /// Checks the element count and that every TX/RX lies inside `domain`
    /// with at least `margin` to spare.
    pub fn validate(&self, domain: &RasterGeometry, margin: f64) -> Result<()> {
        if self.elements == 0 {
            return Err(Error::Config("array needs at least one element".into()));
        }
        if !(self.ring_radius > 0.0 && self.spacing >= 0.0) {
            return Err(Error::Config("ring radius must be positive, spacing non-negative".into()));
        }
        let (x0, y0) = domain.origin;
        let (x1, y1) = (x0 + domain.width(), y0 + domain.height());
        for i in 0..self.elements {
            for (x, y) in [self.tx(i), self.rx(i)] {
                if x < x0 + margin || x > x1 - margin || y < y0 + margin || y > y1 - margin {
                    return Err(Error::OutOfDomain { x, y });
                }
            }
        }
        Ok(())
    }

    /// Same ring with only the first `m` element positions of a `m`-element
    /// layout.
    pub fn with_elements(&self, m: usize) -> Self {
        Self { elements: m, ..*self }
    }
}
