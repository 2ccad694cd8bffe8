use serde::{Deserialize, Serialize};

use super::contour::Contour;
use crate::error::{Error, Result};
use crate::grid::{RasterGeometry, SPEED_OF_LIGHT};

/// Per-cell propagation speed, m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityMap {
    pub geometry: RasterGeometry,
    pub speed: Vec<f64>,
    /// Effective relative permittivity used inside the contour (1.0 for maps
    /// not built from a contour).
    pub eps_e: f64,
}

impl VelocityMap {
    pub fn uniform(geometry: &RasterGeometry, speed: f64) -> Result<Self> {
        Self::from_speeds(geometry, vec![speed; geometry.len()])
    }

    /// Wraps arbitrary speeds; every value must be finite and positive.
    pub fn from_speeds(geometry: &RasterGeometry, speed: Vec<f64>) -> Result<Self> {
        if speed.len() != geometry.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} speeds for {} cells",
                speed.len(),
                geometry.len()
            )));
        }
        if let Some(idx) = speed.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonpositiveSpeed(idx));
        }
        Ok(Self {
            geometry: *geometry,
            speed,
            eps_e: 1.0,
        })
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.speed[self.geometry.index(col, row)]
    }

    /// Returns a map with every speed multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let mut out = Self::from_speeds(&self.geometry, self.speed.iter().map(|v| v * k).collect())?;
        out.eps_e = self.eps_e;
        Ok(out)
    }
}

/// Cell-centre membership of the polygon interior.
pub fn interior_mask(contour: &Contour, geometry: &RasterGeometry) -> Vec<bool> {
    geometry.centers().map(|(x, y)| contour.contains(x, y)).collect()
}

/// Two-valued occupancy velocity map: c/sqrt(eps_e) at cell centres inside the
/// contour, c outside.
pub fn rasterize_velocity_map(
    contour: &Contour,
    eps_e: f64,
    geometry: &RasterGeometry,
) -> Result<VelocityMap> {
    if !(eps_e.is_finite() && eps_e >= 1.0) {
        return Err(Error::InvalidArgument(format!("eps_e must be >= 1, got {eps_e}")));
    }
    let inner = SPEED_OF_LIGHT / eps_e.sqrt();
    let speed = interior_mask(contour, geometry)
        .into_iter()
        .map(|inside| if inside { inner } else { SPEED_OF_LIGHT })
        .collect();
    Ok(VelocityMap {
        geometry: *geometry,
        speed,
        eps_e,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn blob(n: usize) -> Contour {
        let pts = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                let r = 0.04 + 0.006 * (3.0 * a).sin();
                (0.002 + r * a.cos(), -0.005 + 0.9 * r * a.sin())
            })
            .collect();
        Contour::new(pts).unwrap()
    }

    /// Even-odd ray cast, independent of the winding-number path.
    fn ray_cast(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if (a.1 > y) != (b.1 > y) {
                let xc = a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1);
                if x < xc {
                    inside = !inside;
                }
            }
        }
        inside
    }

    #[test]
    fn inside_speed_for_eps_five() {
        let g = RasterGeometry::image();
        let v = rasterize_velocity_map(&blob(90), 5.0, &g).unwrap();
        let inner = SPEED_OF_LIGHT / 5f64.sqrt();
        assert!((inner - 1.3407e8).abs() < 1e4);
        let (col, row) = g.locate(0.002, -0.005).unwrap();
        assert_eq!(v.at(col, row), inner);
        assert_eq!(v.at(0, 0), SPEED_OF_LIGHT);
    }

    #[test]
    fn unit_permittivity_is_uniform() {
        let g = RasterGeometry::image();
        let v = rasterize_velocity_map(&blob(64), 1.0, &g).unwrap();
        assert!(v.speed.iter().all(|&s| s == SPEED_OF_LIGHT));
    }

    #[test]
    fn inside_count_matches_brute_force() {
        let g = RasterGeometry::image();
        let c = blob(77);
        let v = rasterize_velocity_map(&c, 5.0, &g).unwrap();
        let fast = v.speed.iter().filter(|&&s| s < SPEED_OF_LIGHT).count();
        let brute = g.centers().filter(|&(x, y)| ray_cast(c.vertices(), x, y)).count();
        assert_eq!(fast, brute);
        assert!(fast > 1000);
    }

    #[test]
    fn rejects_subunit_permittivity() {
        let g = RasterGeometry::scene(32);
        assert!(rasterize_velocity_map(&blob(32), 0.9, &g).is_err());
        assert!(VelocityMap::from_speeds(&g, vec![0.0; g.len()]).is_err());
    }
}
