//! First-arrival travel times by fast marching.
//!
//! Cells move Far → Close → Known. Close cells sit in a binary heap keyed by
//! (time, row, column), so extraction order is fully deterministic. When a
//! cell becomes Known, every non-Known cell of its 32-cell stencil ring is
//! offered the straight edge from it, with slowness integrated exactly over
//! the cells the edge crosses. Cells in its 8-neighbourhood are also offered
//! the two triangle stencils (one axial and one diagonal neighbour) that
//! contain it. A triangle candidate interpolates τ linearly along the edge
//! between its two Known vertices and picks the arrival point that minimises
//! the total time, i.e. it propagates a locally planar wavefront.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ArrayGeometry;
use crate::grid::RasterGeometry;
use crate::phantom::VelocityMap;

/// Cells within this many cell widths of the source are seeded with the
/// straight-ray time, which is the analytic solution where the neighbourhood
/// is uniform.
pub const SEED_RADIUS_CELLS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeMap {
    pub geometry: RasterGeometry,
    /// Seconds, row-major.
    pub tau: Vec<f64>,
    pub source: (f64, f64),
}

impl TravelTimeMap {
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.tau[self.geometry.index(col, row)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarchState {
    Far,
    Close,
    Known,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey {
    time: f64,
    row: u32,
    col: u32,
}

impl Eq for HeapKey {}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.row.cmp(&other.row))
            .then(self.col.cmp(&other.col))
    }
}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Stencil ring: the 8-neighbourhood first, then the longer edges.
const RING: [(isize, isize); 32] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (2, 1),
    (1, 2),
    (-1, 2),
    (-2, 1),
    (-2, -1),
    (-1, -2),
    (1, -2),
    (2, -1),
    (3, 1),
    (1, 3),
    (-1, 3),
    (-3, 1),
    (-3, -1),
    (-1, -3),
    (1, -3),
    (3, -1),
    (3, 2),
    (2, 3),
    (-2, 3),
    (-3, 2),
    (-3, -2),
    (-2, -3),
    (2, -3),
    (3, -2),
];

/// Arrival time at a cell from a triangle stencil: axial vertex A at distance
/// `h`, diagonal vertex B adjacent to A. Returns `None` when the optimum lies
/// on an endpoint, which the edge candidates already cover.
#[inline]
fn triangle_time(tau_a: f64, tau_b: f64, slowness: f64, h: f64) -> Option<f64> {
    let sh = slowness * h;
    let q = (tau_a - tau_b) / sh;
    if q <= 0.0 || q >= std::f64::consts::FRAC_1_SQRT_2 {
        return None;
    }
    Some(tau_a + sh * (1.0 - q * q).sqrt())
}

/// Cells crossed by the segment from a cell centre to the centre of the cell
/// at offset `d`, with the length (in cell widths) spent in each.
fn edge_parts(d: (isize, isize)) -> Vec<((isize, isize), f64)> {
    let (dx, dy) = (d.0 as f64, d.1 as f64);
    let mut cuts: Vec<f64> = (1..=d.0.unsigned_abs())
        .map(|k| (k as f64 - 0.5) / dx.abs())
        .chain((1..=d.1.unsigned_abs()).map(|k| (k as f64 - 0.5) / dy.abs()))
        .collect();
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    let len = dx.hypot(dy);
    let mut parts = Vec::new();
    let mut prev = 0.0;
    for t in cuts {
        if t > prev {
            let mid = 0.5 * (prev + t);
            let cell = ((0.5 + mid * dx).floor() as isize, (0.5 + mid * dy).floor() as isize);
            parts.push((cell, (t - prev) * len));
            prev = t;
        }
    }
    parts
}

struct Marcher<'a> {
    g: &'a RasterGeometry,
    edges: Vec<Vec<((isize, isize), f64)>>,
    slowness: Vec<f64>,
    tau: Vec<f64>,
    state: Vec<MarchState>,
    heap: BinaryHeap<Reverse<HeapKey>>,
}

impl<'a> Marcher<'a> {
    fn offset(&self, col: usize, row: usize, d: (isize, isize)) -> Option<(usize, usize)> {
        let c = col.checked_add_signed(d.0)?;
        let r = row.checked_add_signed(d.1)?;
        (c < self.g.nx && r < self.g.ny).then_some((c, r))
    }

    fn known(&self, col: usize, row: usize, d: (isize, isize)) -> Option<usize> {
        let (c, r) = self.offset(col, row, d)?;
        let k = self.g.index(c, r);
        (self.state[k] == MarchState::Known).then_some(k)
    }

    /// Slowness integrated along the straight segment from `a` to `b`
    /// (midpoint rule, 16 samples per cell length). Exact in a uniform
    /// neighbourhood and an upper bound on the first arrival otherwise.
    fn straight_ray_time(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let n = ((len / self.g.cell_size) * 16.0).ceil().max(1.0) as usize;
        let first = self.slowness_at(a);
        let mut sum = 0.0;
        let mut uniform = true;
        for k in 0..n {
            let f = (k as f64 + 0.5) / n as f64;
            let s = self.slowness_at((a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)));
            uniform &= s == first;
            sum += s;
        }
        if uniform {
            len * first
        } else {
            len * sum / n as f64
        }
    }

    fn slowness_at(&self, p: (f64, f64)) -> f64 {
        let (c, r) = self.g.locate(p.0, p.1).expect("seed ray stays inside the raster");
        self.slowness[self.g.index(c, r)]
    }

    fn offer(&mut self, k: usize, t: f64) {
        if t < self.tau[k] {
            self.tau[k] = t;
            self.state[k] = MarchState::Close;
            let (col, row) = self.g.coords(k);
            self.heap.push(Reverse(HeapKey {
                time: t,
                row: row as u32,
                col: col as u32,
            }));
        }
    }

    /// Candidates for cell (nc, nr) that involve the newly Known cell `m` at
    /// (mc, mr); cell n sits at `RING[ring]` from m.
    fn update(&mut self, nc: usize, nr: usize, (mc, mr): (usize, usize), ring: usize) {
        let h = self.g.cell_size;
        let n = self.g.index(nc, nr);
        let m = self.g.index(mc, mr);
        let d = (-RING[ring].0, -RING[ring].1);
        let edge: f64 = self.edges[ring]
            .iter()
            .map(|&((dc, dr), w)| {
                let c = mc.wrapping_add_signed(dc);
                let r = mr.wrapping_add_signed(dr);
                w * self.slowness[self.g.index(c, r)]
            })
            .sum();
        let mut best = self.tau[m] + edge * h;
        if d.0.abs() <= 1 && d.1.abs() <= 1 {
            let sn = self.slowness[n];
            let diagonal = d.0 != 0 && d.1 != 0;
            // Triangle partners: for an axial m, the two diagonals flanking
            // it; for a diagonal m, its two axial components.
            let partners: [(isize, isize); 2] = if diagonal {
                [(d.0, 0), (0, d.1)]
            } else {
                [(d.0 - d.1, d.1 + d.0), (d.0 + d.1, d.1 - d.0)]
            };
            for p in partners {
                let Some(o) = self.known(nc, nr, p) else { continue };
                let (a, b) = if diagonal { (o, m) } else { (m, o) };
                let s = 0.5 * (sn + 0.5 * (self.slowness[a] + self.slowness[b]));
                if let Some(t) = triangle_time(self.tau[a], self.tau[b], s, h) {
                    best = best.min(t);
                }
            }
        }
        self.offer(n, best);
    }
}

fn march(vmap: &VelocityMap, source: (f64, f64), order: Option<&mut Vec<usize>>) -> Result<TravelTimeMap> {
    let g = &vmap.geometry;
    if vmap.speed.len() != g.len() {
        return Err(Error::ShapeMismatch("velocity map size".into()));
    }
    if let Some(idx) = vmap.speed.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::NonpositiveSpeed(idx));
    }
    let (sc, sr) = g
        .locate(source.0, source.1)
        .ok_or(Error::SourceOutOfDomain { x: source.0, y: source.1 })?;
    let mut m = Marcher {
        g,
        edges: RING.iter().map(|&d| edge_parts(d)).collect(),
        slowness: vmap.speed.iter().map(|v| 1.0 / v).collect(),
        tau: vec![f64::INFINITY; g.len()],
        state: vec![MarchState::Far; g.len()],
        heap: BinaryHeap::new(),
    };

    let reach = SEED_RADIUS_CELLS.ceil() as isize;
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            if ((dc * dc + dr * dr) as f64).sqrt() > SEED_RADIUS_CELLS {
                continue;
            }
            let Some((c, r)) = m.offset(sc, sr, (dc, dr)) else { continue };
            if (dc, dr) == (0, 0) {
                m.offer(g.index(c, r), 0.0);
                continue;
            }
            let t = m.straight_ray_time(source, g.cell_center(c, r));
            m.offer(g.index(c, r), t);
        }
    }

    let mut order = order;
    while let Some(Reverse(key)) = m.heap.pop() {
        let (col, row) = (key.col as usize, key.row as usize);
        let k = g.index(col, row);
        if m.state[k] == MarchState::Known || key.time != m.tau[k] {
            continue;
        }
        m.state[k] = MarchState::Known;
        if let Some(o) = order.as_deref_mut() {
            o.push(k);
        }
        for (ring, &d) in RING.iter().enumerate() {
            let Some((nc, nr)) = m.offset(col, row, d) else { continue };
            if m.state[g.index(nc, nr)] == MarchState::Known {
                continue;
            }
            m.update(nc, nr, (col, row), ring);
        }
    }
    debug_assert!(m.state.iter().all(|&s| s == MarchState::Known));
    Ok(TravelTimeMap {
        geometry: *g,
        tau: m.tau,
        source,
    })
}

/// Solves |∇τ| = 1/v with τ = 0 at `source`.
pub fn solve_travel_time(vmap: &VelocityMap, source: (f64, f64)) -> Result<TravelTimeMap> {
    march(vmap, source, None)
}

/// As [`solve_travel_time`], also returning cell indices in the order they
/// became Known.
pub fn solve_travel_time_traced(vmap: &VelocityMap, source: (f64, f64)) -> Result<(TravelTimeMap, Vec<usize>)> {
    let mut order = Vec::with_capacity(vmap.geometry.len());
    let map = march(vmap, source, Some(&mut order))?;
    Ok((map, order))
}

/// Cell-wise sum of transmit and receive travel times.
pub fn two_way_time(tau_tx: &TravelTimeMap, tau_rx: &TravelTimeMap) -> Result<TravelTimeMap> {
    if !tau_tx.geometry.same_as(&tau_rx.geometry) || tau_tx.tau.len() != tau_rx.tau.len() {
        return Err(Error::ShapeMismatch("travel-time maps cover different rasters".into()));
    }
    Ok(TravelTimeMap {
        geometry: tau_tx.geometry,
        tau: tau_tx.tau.iter().zip(&tau_rx.tau).map(|(a, b)| a + b).collect(),
        source: tau_tx.source,
    })
}

/// Two-way time map of every array element. Solves for TX and RX run in
/// parallel; a zero TX–RX spacing reuses the single solve.
pub fn solve_all_elements(vmap: &VelocityMap, geom: &ArrayGeometry) -> Result<Vec<TravelTimeMap>> {
    let sources: Vec<(f64, f64)> = if geom.spacing == 0.0 {
        (0..geom.elements).map(|i| geom.tx(i)).collect()
    } else {
        (0..geom.elements).flat_map(|i| [geom.tx(i), geom.rx(i)]).collect()
    };
    let solved = sources
        .par_iter()
        .map(|&s| solve_travel_time(vmap, s))
        .collect::<Result<Vec<_>>>()?;
    if geom.spacing == 0.0 {
        solved.iter().map(|t| two_way_time(t, t)).collect()
    } else {
        solved.chunks(2).map(|p| two_way_time(&p[0], &p[1])).collect()
    }
}
