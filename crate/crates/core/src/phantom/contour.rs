use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::build::TissueMap;
use super::tissue::TissueLabel;
use crate::error::{Error, Result};

pub const MIN_CONTOUR_VERTICES: usize = 16;

/// Rounds of re-drawing offending vertices before a perturbation gives up.
const PERTURB_RETRIES: usize = 64;

/// Closed, simple, counter-clockwise polygon. The closing edge from the last
/// vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContourFile", into = "ContourFile")]
pub struct Contour {
    vertices: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct ContourFile {
    vertices: Vec<(f64, f64)>,
}

impl TryFrom<ContourFile> for Contour {
    type Error = Error;
    fn try_from(f: ContourFile) -> Result<Self> {
        Contour::new(f.vertices)
    }
}

impl From<Contour> for ContourFile {
    fn from(c: Contour) -> Self {
        ContourFile { vertices: c.vertices }
    }
}

impl Contour {
    /// Validates vertex count, finiteness, simplicity and orientation.
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < MIN_CONTOUR_VERTICES {
            return Err(Error::DegenerateContour(format!(
                "{} vertices, need at least {MIN_CONTOUR_VERTICES}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|&(x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(Error::DegenerateContour("non-finite vertex".into()));
        }
        if signed_area(&vertices) <= 0.0 {
            return Err(Error::DegenerateContour("polygon is not counter-clockwise".into()));
        }
        if !crossing_edges(&vertices).is_empty() {
            return Err(Error::DegenerateContour("polygon self-intersects".into()));
        }
        Ok(Self { vertices })
    }

    /// Like [`Contour::new`] but accepts either orientation.
    pub fn from_points(mut vertices: Vec<(f64, f64)>) -> Result<Self> {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        edges(&self.vertices).map(|(a, b)| dist(a, b)).sum()
    }

    /// Area centroid.
    pub fn centroid(&self) -> (f64, f64) {
        let a = self.area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in edges(&self.vertices) {
            let cross = p.0 * q.1 - q.0 * p.1;
            cx += (p.0 + q.0) * cross;
            cy += (p.1 + q.1) * cross;
        }
        (cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Winding-number point-in-polygon test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        winding_number(&self.vertices, x, y) != 0
    }

    /// Re-samples the polygon to `n` vertices equally spaced by arc length,
    /// starting from the first vertex.
    pub fn resample(&self, n: usize) -> Result<Contour> {
        Contour::new(resample_closed(&self.vertices, n))
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn edges(v: &[(f64, f64)]) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
    (0..v.len()).map(move |i| (v[i], v[(i + 1) % v.len()]))
}

pub(crate) fn signed_area(v: &[(f64, f64)]) -> f64 {
    0.5 * edges(v).map(|(p, q)| p.0 * q.1 - q.0 * p.1).sum::<f64>()
}

#[inline]
fn is_left(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1)
}

pub(crate) fn winding_number(v: &[(f64, f64)], x: f64, y: f64) -> i32 {
    let p = (x, y);
    let mut wn = 0;
    for (a, b) in edges(v) {
        if a.1 <= y {
            if b.1 > y && is_left(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b.1 <= y && is_left(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> i8 {
    let v = is_left(a, b, c);
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_touch(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b))
}

/// Indices of vertices whose incident edges intersect a non-adjacent edge or
/// fold back onto an adjacent one. Empty for a simple polygon.
pub(crate) fn crossing_edges(v: &[(f64, f64)]) -> Vec<usize> {
    let n = v.len();
    let mut bad = Vec::new();
    if n < 3 {
        return (0..n).collect();
    }
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if a == b {
            bad.extend([i, (i + 1) % n]);
            continue;
        }
        // Adjacent edge folding back on this one.
        let c = v[(i + 2) % n];
        if orient(a, b, c) == 0 && ((c.0 - b.0) * (a.0 - b.0) + (c.1 - b.1) * (a.1 - b.1)) > 0.0 {
            bad.push((i + 1) % n);
        }
        let (minx, maxx) = (a.0.min(b.0), a.0.max(b.0));
        let (miny, maxy) = (a.1.min(b.1), a.1.max(b.1));
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if c.0.max(d.0) < minx || c.0.min(d.0) > maxx || c.1.max(d.1) < miny || c.1.min(d.1) > maxy {
                continue;
            }
            if segments_touch(a, b, c, d) {
                bad.extend([i, (i + 1) % n, j, (j + 1) % n]);
            }
        }
    }
    bad.sort_unstable();
    bad.dedup();
    bad
}

fn resample_closed(v: &[(f64, f64)], n: usize) -> Vec<(f64, f64)> {
    let lens: Vec<f64> = edges(v).map(|(a, b)| dist(a, b)).collect();
    let total: f64 = lens.iter().sum();
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let (mut edge, mut walked) = (0usize, 0.0);
    for k in 0..n {
        let target = k as f64 * step;
        while edge < lens.len() - 1 && walked + lens[edge] < target {
            walked += lens[edge];
            edge += 1;
        }
        let (a, b) = (v[edge], v[(edge + 1) % v.len()]);
        let t = if lens[edge] > 0.0 {
            ((target - walked) / lens[edge]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
    }
    out
}

/// Marching-squares edge identifier on the padded corner lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeKey {
    /// Between corners (i, j) and (i + 1, j).
    H(usize, usize),
    /// Between corners (i, j) and (i, j + 1).
    V(usize, usize),
}

impl EdgeKey {
    fn point(self) -> (f64, f64) {
        match self {
            EdgeKey::H(i, j) => (i as f64 + 0.5, j as f64),
            EdgeKey::V(i, j) => (i as f64, j as f64 + 0.5),
        }
    }
}

/// Traces the air/tissue boundary with marching squares over cell centres and
/// resamples the outer loop to `n_vertices` points equally spaced by arc
/// length.
pub fn extract_contour(map: &TissueMap, n_vertices: usize) -> Result<Contour> {
    if n_vertices < MIN_CONTOUR_VERTICES {
        return Err(Error::InvalidArgument(format!(
            "n_vertices must be >= {MIN_CONTOUR_VERTICES}, got {n_vertices}"
        )));
    }
    let g = &map.geometry;
    let (w, h) = (g.nx + 2, g.ny + 2);
    let occ = |i: usize, j: usize| -> bool {
        i >= 1 && j >= 1 && i <= g.nx && j <= g.ny && map.label(i - 1, j - 1) != TissueLabel::Air
    };
    if !map.labels.iter().any(|&l| l != TissueLabel::Air) {
        return Err(Error::EmptyScene);
    }

    use EdgeKey::{H, V};
    let mut next: BTreeMap<EdgeKey, EdgeKey> = BTreeMap::new();
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let case = u8::from(occ(i, j))
                | u8::from(occ(i + 1, j)) << 1
                | u8::from(occ(i + 1, j + 1)) << 2
                | u8::from(occ(i, j + 1)) << 3;
            let (b, r, t, l) = (H(i, j), V(i + 1, j), H(i, j + 1), V(i, j));
            // Directed so that occupied corners lie on the left.
            let segs: &[(EdgeKey, EdgeKey)] = match case {
                0 | 15 => &[],
                1 => &[(b, l)],
                2 => &[(r, b)],
                3 => &[(r, l)],
                4 => &[(t, r)],
                5 => &[(b, l), (t, r)],
                6 => &[(t, b)],
                7 => &[(t, l)],
                8 => &[(l, t)],
                9 => &[(b, t)],
                10 => &[(r, b), (l, t)],
                11 => &[(r, t)],
                12 => &[(l, r)],
                13 => &[(b, r)],
                14 => &[(l, b)],
                _ => unreachable!(),
            };
            for &(from, to) in segs {
                next.insert(from, to);
            }
        }
    }

    let mut best: Option<(f64, Vec<(f64, f64)>)> = None;
    while let Some((&start, _)) = next.iter().next() {
        let mut ring = Vec::new();
        let mut key = start;
        while let Some(to) = next.remove(&key) {
            let (pi, pj) = key.point();
            ring.push((
                g.origin.0 + (pi - 0.5) * g.cell_size,
                g.origin.1 + (pj - 0.5) * g.cell_size,
            ));
            key = to;
            if key == start {
                break;
            }
        }
        let area = signed_area(&ring);
        if area > 0.0 && best.as_ref().map_or(true, |(a, _)| area > *a) {
            best = Some((area, ring));
        }
    }
    let (_, ring) = best.ok_or(Error::EmptyScene)?;
    Contour::new(resample_closed(&ring, n_vertices))
}

/// Displaces each vertex along the ray from the centroid by i.i.d. Gaussian
/// noise of standard deviation `sigma`, truncated to `[-max_dev, max_dev]`.
/// Vertices involved in a self-intersection are re-drawn.
pub fn perturb_contour(contour: &Contour, sigma: f64, max_dev: f64, seed: u64) -> Result<Contour> {
    if !(sigma > 0.0 && sigma.is_finite()) || !(max_dev > 0.0 && max_dev.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma ({sigma}) and max_dev ({max_dev}) must be positive"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| loop {
        let z: f64 = rng.sample(StandardNormal);
        let d = z * sigma;
        if d.abs() <= max_dev {
            return d;
        }
    };
    let c = contour.centroid();
    let dirs: Vec<(f64, f64)> = contour
        .vertices
        .iter()
        .map(|&(x, y)| {
            let (dx, dy) = (x - c.0, y - c.1);
            let r = dx.hypot(dy);
            if r > 0.0 {
                (dx / r, dy / r)
            } else {
                (0.0, 0.0)
            }
        })
        .collect();
    let mut offsets: Vec<f64> = (0..contour.len()).map(|_| draw(&mut rng)).collect();
    let apply = |offsets: &[f64]| -> Vec<(f64, f64)> {
        contour
            .vertices
            .iter()
            .zip(&dirs)
            .zip(offsets)
            .map(|((&(x, y), &(ux, uy)), &d)| (x + d * ux, y + d * uy))
            .collect()
    };
    for _ in 0..=PERTURB_RETRIES {
        let verts = apply(&offsets);
        let bad = crossing_edges(&verts);
        if bad.is_empty() && signed_area(&verts) > 0.0 {
            return Contour::new(verts);
        }
        let redraw = if bad.is_empty() { (0..verts.len()).collect() } else { bad };
        for i in redraw {
            offsets[i] = draw(&mut rng);
        }
    }
    Err(Error::DegenerateContour(format!(
        "no simple polygon after {PERTURB_RETRIES} re-draws"
    )))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::RasterGeometry;
    use crate::phantom::{PropertyTable, TissueMap};

    fn circle(n: usize, r: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                (r * a.cos(), r * a.sin())
            })
            .collect()
    }

    fn disc_map(r: f64, n: usize) -> TissueMap {
        let g = RasterGeometry::scene(n);
        let mut map = TissueMap::empty(&g, &PropertyTable::default());
        map.paint_disc((0.003, -0.002), r, TissueLabel::Skin);
        map
    }

    #[test]
    fn validation_rejects_bad_polygons() {
        assert!(Contour::new(circle(8, 0.01)).is_err());
        let mut cw = circle(32, 0.01);
        cw.reverse();
        assert!(Contour::new(cw.clone()).is_err());
        assert!(Contour::from_points(cw).is_ok());
        let mut bow = circle(32, 0.01);
        bow.swap(3, 20);
        assert!(Contour::new(bow).is_err());
    }

    #[test]
    fn circle_traces_to_circle() {
        let r = 0.04;
        let map = disc_map(r, 256);
        let c = extract_contour(&map, 64).unwrap();
        assert_eq!(c.len(), 64);
        let h = map.geometry.cell_size;
        for &(x, y) in c.vertices() {
            let d = (x - 0.003).hypot(y + 0.002);
            assert!((d - r).abs() <= h, "vertex at {d}");
        }
    }

    #[test]
    fn contour_area_matches_pixel_count() {
        let map = disc_map(0.035, 256);
        let c = extract_contour(&map, 128).unwrap();
        let h = map.geometry.cell_size;
        let pixels = map.labels.iter().filter(|&&l| l != TissueLabel::Air).count() as f64 * h * h;
        assert!((c.area() - pixels).abs() <= 0.02 * pixels, "{} vs {}", c.area(), pixels);
    }

    #[test]
    fn tissue_centres_are_enclosed() {
        let map = disc_map(0.03, 200);
        let c = extract_contour(&map, 96).unwrap();
        let g = map.geometry;
        let half = 0.5 * g.cell_size;
        for idx in 0..g.len() {
            if map.labels[idx] == TissueLabel::Air {
                continue;
            }
            let (col, row) = g.coords(idx);
            let (x, y) = g.cell_center(col, row);
            let inside = [(0.0, 0.0), (half, 0.0), (-half, 0.0), (0.0, half), (0.0, -half)]
                .iter()
                .any(|&(dx, dy)| c.contains(x + dx, y + dy));
            assert!(inside, "cell ({col},{row}) outside contour");
        }
    }

    #[test]
    fn empty_scene_has_no_contour() {
        let g = RasterGeometry::scene(64);
        let map = TissueMap::empty(&g, &PropertyTable::default());
        assert!(matches!(extract_contour(&map, 32), Err(Error::EmptyScene)));
        assert!(extract_contour(&disc_map(0.02, 64), 8).is_err());
    }

    #[test]
    fn perturbation_respects_bound_and_seed() {
        let c = Contour::new(circle(128, 0.04)).unwrap();
        let p = perturb_contour(&c, 1e-3 / 3.0, 1e-3, 11).unwrap();
        let q = perturb_contour(&c, 1e-3 / 3.0, 1e-3, 11).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.len(), c.len());
        for (a, b) in c.vertices().iter().zip(p.vertices()) {
            assert!(dist(*a, *b) <= 1e-3 + 1e-15);
        }
        assert_ne!(p, perturb_contour(&c, 1e-3 / 3.0, 1e-3, 12).unwrap());
    }

    #[test]
    fn vanishing_noise_is_identity() {
        let c = Contour::new(circle(64, 0.03)).unwrap();
        let p = perturb_contour(&c, 1e-13, 1e-3, 5).unwrap();
        for (a, b) in c.vertices().iter().zip(p.vertices()) {
            assert!(dist(*a, *b) < 1e-9);
        }
        assert!(perturb_contour(&c, 0.0, 1e-3, 5).is_err());
    }

    #[test]
    fn dense_contour_with_large_noise_stays_simple() {
        // 0.5 mm vertex spacing against 1 mm noise forces re-draws.
        let c = Contour::new(circle(400, 0.032)).unwrap();
        let p = perturb_contour(&c, 1e-3, 1e-3, 3).unwrap();
        assert!(crossing_edges(p.vertices()).is_empty());
    }
}
