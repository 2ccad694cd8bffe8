//! Layered limb phantoms, surface contours and contour-derived velocity maps.

mod build;
mod contour;
mod tissue;
mod velocity;

pub use build::{
    base_phantom, build_phantom, LayerThicknesses, LimbKind, PhantomSpec, TissueMap, ARRAY_CLEARANCE,
};
pub use contour::{extract_contour, perturb_contour, Contour, MIN_CONTOUR_VERTICES};
pub use tissue::{tissue_properties, DielectricProps, PropertyTable, TissueLabel};
pub use velocity::{interior_mask, rasterize_velocity_map, VelocityMap};

/// Standard deviation of the radial contour noise for a given worst-case
/// deviation.
pub fn contour_noise_sigma(max_dev: f64) -> f64 {
    max_dev / 3.0
}
