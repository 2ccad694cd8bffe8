use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tissue::{PropertyTable, TissueLabel};
use crate::error::{Error, Result};
use crate::grid::{RasterGeometry, SCENE_SIZE};

/// Minimum gap between the limb and the domain edge that the array ring and
/// absorbing layer need.
pub const ARRAY_CLEARANCE: f64 = 0.02;

const FLUID_MARGIN: f64 = 0.25e-3;
const SKIN_THICKNESS: f64 = 1.5e-3;
const MIN_MUSCLE: f64 = 6e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimbKind {
    Upper,
    Lower,
}

/// Layer thicknesses along the major axis, m. Bone is a core disc, so its
/// entry is a radius; muscle fills whatever remains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerThicknesses {
    pub skin: f64,
    pub fat: f64,
    pub bone_radius: f64,
}

/// Geometry of one layered limb cross-section. Layer boundaries are
/// concentric ellipses sharing `axis_ratio` and `orientation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub base_id: u32,
    pub limb_kind: LimbKind,
    /// Semi-major axis of the skin surface, m.
    pub outer_radius: f64,
    /// Minor/major axis ratio in (0, 1].
    #[serde(default = "one")]
    pub axis_ratio: f64,
    /// Direction of the major axis, rad.
    #[serde(default)]
    pub orientation: f64,
    pub layers: LayerThicknesses,
    /// Fluid disc radius, m. Zero means no inclusion.
    #[serde(default)]
    pub fluid_radius: f64,
    #[serde(default)]
    pub fluid_angle: f64,
    /// Distance of the fluid centre below the fat/skin interface along the
    /// ray at `fluid_angle`, m.
    #[serde(default)]
    pub fluid_depth: f64,
    #[serde(default)]
    pub center: (f64, f64),
    /// At most `i64::MAX` so scene files stay valid TOML.
    #[serde(default)]
    pub rng_seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Labelled dielectric scene on a raster.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueMap {
    pub geometry: RasterGeometry,
    pub labels: Vec<TissueLabel>,
    pub props: PropertyTable,
}

impl PhantomSpec {
    /// Boundary "radii" along the major axis, innermost first: bone, muscle,
    /// fat, skin.
    fn boundaries(&self) -> [f64; 4] {
        let skin = self.outer_radius;
        let fat = skin - self.layers.skin;
        let muscle = fat - self.layers.fat;
        [self.layers.bone_radius, muscle, fat, skin]
    }

    /// Normalised elliptic radius of a point: the semi-major axis of the
    /// ellipse (of this spec's shape) passing through it.
    fn elliptic_radius(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.orientation.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u * u + (v / self.axis_ratio).powi(2)).sqrt()
    }

    /// Distance from the centre to the ellipse of semi-major axis `a` along
    /// the world direction `angle`.
    fn ray_extent(&self, a: f64, angle: f64) -> f64 {
        let phi = angle - self.orientation;
        let (s, c) = phi.sin_cos();
        a / (c * c + (s / self.axis_ratio).powi(2)).sqrt()
    }

    pub fn label_at(&self, x: f64, y: f64) -> TissueLabel {
        if self.fluid_radius > 0.0 {
            let (fx, fy) = self.fluid_center();
            if (x - fx).hypot(y - fy) < self.fluid_radius {
                return TissueLabel::Fluid;
            }
        }
        let rho = self.elliptic_radius(x, y);
        let [bone, muscle, fat, skin] = self.boundaries();
        if rho < bone {
            TissueLabel::Bone
        } else if rho < muscle {
            TissueLabel::Muscle
        } else if rho < fat {
            TissueLabel::Fat
        } else if rho < skin {
            TissueLabel::Skin
        } else {
            TissueLabel::Air
        }
    }

    pub fn fluid_center(&self) -> (f64, f64) {
        let [_, _, fat, _] = self.boundaries();
        let r = self.ray_extent(fat, self.fluid_angle) - self.fluid_depth;
        let (s, c) = self.fluid_angle.sin_cos();
        (self.center.0 + r * c, self.center.1 + r * s)
    }

    /// Checks layer nesting, domain fit, and that the fluid disc stays inside
    /// the fat annulus.
    pub fn validate(&self) -> Result<()> {
        let geo = |msg: String| Err(Error::SpecGeometry(msg));
        let finite = [
            self.outer_radius,
            self.axis_ratio,
            self.orientation,
            self.layers.skin,
            self.layers.fat,
            self.layers.bone_radius,
            self.fluid_radius,
            self.fluid_angle,
            self.fluid_depth,
            self.center.0,
            self.center.1,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return geo("non-finite parameter".into());
        }
        if !(self.axis_ratio > 0.0 && self.axis_ratio <= 1.0) {
            return geo(format!("axis ratio {} outside (0, 1]", self.axis_ratio));
        }
        if self.layers.skin <= 0.0 || self.layers.fat <= 0.0 || self.layers.bone_radius <= 0.0 {
            return geo("layer thicknesses must be positive".into());
        }
        let [bone, muscle, fat, skin] = self.boundaries();
        if !(0.0 < bone && bone < muscle && muscle < fat && fat < skin) {
            return geo(format!(
                "layers do not nest: bone {bone:.4} muscle {muscle:.4} fat {fat:.4} skin {skin:.4}"
            ));
        }
        let reach = self.center.0.abs().max(self.center.1.abs()) + self.outer_radius;
        if reach + ARRAY_CLEARANCE > SCENE_SIZE / 2.0 {
            return geo(format!(
                "limb reaches {reach:.4} m; needs {ARRAY_CLEARANCE} m clearance inside the domain"
            ));
        }
        if self.fluid_radius < 0.0 {
            return geo("negative fluid radius".into());
        }
        if self.fluid_radius > 0.0 && !self.fluid_fits() {
            return geo(format!(
                "fluid disc r={:.4} at angle {:.3} depth {:.4} leaves the fat annulus",
                self.fluid_radius, self.fluid_angle, self.fluid_depth
            ));
        }
        Ok(())
    }

    fn fluid_fits(&self) -> bool {
        let [_, muscle, fat, _] = self.boundaries();
        let (fx, fy) = self.fluid_center();
        let inside_fat = |x: f64, y: f64| {
            let rho = self.elliptic_radius(x, y);
            rho > muscle && rho < fat
        };
        if !inside_fat(fx, fy) {
            return false;
        }
        const SAMPLES: usize = 720;
        (0..SAMPLES).all(|k| {
            let a = 2.0 * PI * k as f64 / SAMPLES as f64;
            let r = self.fluid_radius + FLUID_MARGIN;
            inside_fat(fx + r * a.cos(), fy + r * a.sin())
        })
    }

    /// Largest fluid radius that fits at any angle of the fat annulus. The
    /// layer is thinnest along the minor axis; 2% slack absorbs curvature.
    pub fn max_fluid_radius(&self) -> f64 {
        (0.98 * (self.axis_ratio * self.layers.fat / 2.0 - FLUID_MARGIN)).max(0.0)
    }

    /// Returns a copy with a fluid disc of the given radius placed at a
    /// uniformly drawn angle and depth inside the fat annulus. Draws come from
    /// `rng_seed`.
    pub fn with_fluid(&self, radius: f64) -> Result<PhantomSpec> {
        let mut out = self.clone();
        out.fluid_radius = radius;
        if radius == 0.0 {
            out.fluid_angle = 0.0;
            out.fluid_depth = 0.0;
            out.validate()?;
            return Ok(out);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let [_, muscle, fat, _] = self.boundaries();
        for _ in 0..512 {
            let angle = rng.gen_range(0.0..2.0 * PI);
            let thickness = self.ray_extent(fat, angle) - self.ray_extent(muscle, angle);
            let lo = radius + FLUID_MARGIN;
            let hi = thickness - radius - FLUID_MARGIN;
            if hi <= lo {
                continue;
            }
            out.fluid_angle = angle;
            out.fluid_depth = rng.gen_range(lo..hi);
            if out.fluid_fits() {
                out.validate()?;
                return Ok(out);
            }
        }
        Err(Error::SpecGeometry(format!(
            "no placement for a {radius:.4} m fluid disc in phantom {}",
            self.base_id
        )))
    }
}

/// One of the ten deterministic base limb profiles (ids 0..=4 upper limb,
/// 5..=9 lower limb), without a fluid inclusion.
pub fn base_phantom(base_id: u32) -> Result<PhantomSpec> {
    if base_id > 9 {
        return Err(Error::SpecGeometry(format!("base phantom id {base_id} not in 0..=9")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x11AB_5CA7_0000 + base_id as u64);
    let (limb_kind, radius_range) = if base_id < 5 {
        (LimbKind::Upper, 40e-3..55e-3)
    } else {
        (LimbKind::Lower, 28e-3..40e-3)
    };
    let outer_radius = rng.gen_range(radius_range);
    let bone_radius = rng.gen_range(8e-3..12e-3);
    let fat_max = (outer_radius - SKIN_THICKNESS - bone_radius - MIN_MUSCLE).min(14e-3);
    let fat = rng.gen_range(7e-3..fat_max);
    let spec = PhantomSpec {
        base_id,
        limb_kind,
        outer_radius,
        axis_ratio: rng.gen_range(0.85..1.0),
        orientation: rng.gen_range(0.0..PI),
        layers: LayerThicknesses {
            skin: SKIN_THICKNESS,
            fat,
            bone_radius,
        },
        fluid_radius: 0.0,
        fluid_angle: 0.0,
        fluid_depth: 0.0,
        center: (0.0, 0.0),
        rng_seed: rng.gen::<u64>() >> 1,
    };
    spec.validate()?;
    Ok(spec)
}

/// Rasterises the phantom by evaluating the label at every cell centre.
pub fn build_phantom(
    spec: &PhantomSpec,
    geometry: &RasterGeometry,
    props: &PropertyTable,
) -> Result<TissueMap> {
    spec.validate()?;
    let labels = geometry.centers().map(|(x, y)| spec.label_at(x, y)).collect();
    Ok(TissueMap {
        geometry: *geometry,
        labels,
        props: props.clone(),
    })
}

impl TissueMap {
    /// All-air scene.
    pub fn empty(geometry: &RasterGeometry, props: &PropertyTable) -> Self {
        Self {
            geometry: *geometry,
            labels: vec![TissueLabel::Air; geometry.len()],
            props: props.clone(),
        }
    }

    pub fn label(&self, col: usize, row: usize) -> TissueLabel {
        self.labels[self.geometry.index(col, row)]
    }

    pub fn count(&self, label: TissueLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Sets every cell whose centre lies within `radius` of `center`.
    pub fn paint_disc(&mut self, center: (f64, f64), radius: f64, label: TissueLabel) {
        for idx in 0..self.labels.len() {
            let (col, row) = self.geometry.coords(idx);
            let (x, y) = self.geometry.cell_center(col, row);
            if (x - center.0).hypot(y - center.1) < radius {
                self.labels[idx] = label;
            }
        }
    }

    /// Label at an arbitrary point (nearest cell), `Air` outside the raster.
    pub fn label_near(&self, x: f64, y: f64) -> TissueLabel {
        match self.geometry.locate(x, y) {
            Some((col, row)) => self.label(col, row),
            None => TissueLabel::Air,
        }
    }

    /// Binary mask of `label` resampled onto another raster by nearest cell.
    pub fn mask_on(&self, target: &RasterGeometry, label: TissueLabel) -> Vec<u8> {
        target
            .centers()
            .map(|(x, y)| u8::from(self.label_near(x, y) == label))
            .collect()
    }

    /// Checks that every present label has properties (PEC excepted).
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.geometry.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a {}x{} raster",
                self.labels.len(),
                self.geometry.nx,
                self.geometry.ny
            )));
        }
        for label in TissueLabel::ALL {
            if label != TissueLabel::Pec && self.props.get(label).is_none() && self.labels.contains(&label) {
                return Err(Error::Config(format!("no properties for {}", label.name())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_phantom(fluid: f64) -> PhantomSpec {
        let mut spec = PhantomSpec {
            base_id: 0,
            limb_kind: LimbKind::Upper,
            outer_radius: 45e-3,
            axis_ratio: 1.0,
            orientation: 0.0,
            layers: LayerThicknesses {
                skin: 1.5e-3,
                fat: 14e-3,
                bone_radius: 10e-3,
            },
            fluid_radius: 0.0,
            fluid_angle: 0.0,
            fluid_depth: 0.0,
            center: (0.0, 0.0),
            rng_seed: 7,
        };
        if fluid > 0.0 {
            spec.fluid_radius = fluid;
            spec.fluid_angle = 0.7;
            spec.fluid_depth = 7e-3;
        }
        spec
    }

    #[test]
    fn no_fluid_when_radius_is_zero() {
        let g = RasterGeometry::scene(256);
        let map = build_phantom(&disc_phantom(0.0), &g, &PropertyTable::default()).unwrap();
        assert_eq!(map.count(TissueLabel::Fluid), 0);
        assert!(map.count(TissueLabel::Skin) > 0);
        assert!(map.count(TissueLabel::Bone) > 0);
    }

    #[test]
    fn mild_inclusion_area_matches_disc() {
        let g = RasterGeometry::scene(256);
        let r = 2.5e-3;
        let map = build_phantom(&disc_phantom(r), &g, &PropertyTable::default()).unwrap();
        let expected = PI * r * r / (g.cell_size * g.cell_size);
        let got = map.count(TissueLabel::Fluid) as f64;
        assert!((got - expected).abs() <= 0.10 * expected, "{got} vs {expected}");
    }

    #[test]
    fn severe_to_mild_area_ratio() {
        let g = RasterGeometry::scene(512);
        let props = PropertyTable::default();
        let mild = build_phantom(&disc_phantom(2.5e-3), &g, &props).unwrap();
        let severe = build_phantom(&disc_phantom(6e-3), &g, &props).unwrap();
        let ratio = severe.count(TissueLabel::Fluid) as f64 / mild.count(TissueLabel::Fluid) as f64;
        assert!((ratio - 5.76).abs() < 0.05 * 5.76, "ratio {ratio}");
    }

    #[test]
    fn rejects_fluid_outside_fat() {
        let mut spec = disc_phantom(2.5e-3);
        spec.fluid_depth = 0.5e-3;
        assert!(matches!(spec.validate(), Err(Error::SpecGeometry(_))));
        spec.fluid_depth = 13.9e-3;
        assert!(matches!(spec.validate(), Err(Error::SpecGeometry(_))));
    }

    #[test]
    fn rejects_unnested_layers() {
        let mut spec = disc_phantom(0.0);
        spec.layers.bone_radius = 40e-3;
        assert!(matches!(spec.validate(), Err(Error::SpecGeometry(_))));
        let mut spec = disc_phantom(0.0);
        spec.outer_radius = 0.09;
        assert!(matches!(spec.validate(), Err(Error::SpecGeometry(_))));
    }

    #[test]
    fn labels_nest_along_rays() {
        let rank = |l: TissueLabel| match l {
            TissueLabel::Bone => 0,
            TissueLabel::Muscle => 1,
            TissueLabel::Fat | TissueLabel::Fluid => 2,
            TissueLabel::Skin => 3,
            TissueLabel::Air => 4,
            TissueLabel::Pec => 99,
        };
        for id in 0..10 {
            let spec = base_phantom(id).unwrap().with_fluid(2.5e-3).unwrap();
            for k in 0..64 {
                let a = 2.0 * PI * k as f64 / 64.0;
                let mut last = 0;
                for s in 0..400 {
                    let r = s as f64 * 0.25e-3;
                    let l = spec.label_at(spec.center.0 + r * a.cos(), spec.center.1 + r * a.sin());
                    let rk = rank(l);
                    assert!(rk >= last, "phantom {id} ray {k} inverts at r={r}");
                    last = rk;
                }
            }
        }
    }

    #[test]
    fn base_family_is_deterministic_and_valid() {
        for id in 0..10 {
            let a = base_phantom(id).unwrap();
            let b = base_phantom(id).unwrap();
            assert_eq!(a, b);
            let expected = if id < 5 { LimbKind::Upper } else { LimbKind::Lower };
            assert_eq!(a.limb_kind, expected);
            assert!(a.max_fluid_radius() >= 2.5e-3);
            let with = a.with_fluid(2.5e-3).unwrap();
            assert_eq!(with, a.with_fluid(2.5e-3).unwrap());
        }
        assert!(base_phantom(10).is_err());
    }

    #[test]
    fn fluid_overwrites_fat_only() {
        let g = RasterGeometry::scene(256);
        let props = PropertyTable::default();
        for id in [0, 3, 6, 9] {
            let dry = base_phantom(id).unwrap();
            let wet = dry.with_fluid(dry.max_fluid_radius().min(6e-3)).unwrap();
            let a = build_phantom(&dry, &g, &props).unwrap();
            let b = build_phantom(&wet, &g, &props).unwrap();
            for (x, y) in a.labels.iter().zip(&b.labels) {
                if x != y {
                    assert_eq!((*x, *y), (TissueLabel::Fat, TissueLabel::Fluid));
                }
            }
            assert!(b.count(TissueLabel::Fluid) > 0);
        }
    }
}
