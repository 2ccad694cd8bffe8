//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use lymphscan::grid::RasterGeometry;
use lymphscan::phantom::VelocityMap;
use lymphscan::SPEED_OF_LIGHT;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OFFSETS_16: [(isize, isize); 16] = [
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (1, 2), (1, -2), (-1, 2), (-1, -2),
    (2, 1), (2, -1), (-2, 1), (-2, -1),
];

pub fn offsets_32() -> Vec<(isize, isize)> {
    let mut out = OFFSETS_16.to_vec();
    for (a, b) in [(1, 3), (3, 1), (2, 3), (3, 2)] {
        for (sa, sb) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            out.push((sa * a, sb * b));
        }
    }
    out
}

#[derive(Clone, Copy)]
pub enum EdgeCost {
    /// Length times slowness averaged along the segment (exact per-cell
    /// path lengths).
    Mean,
    /// Length times the smallest slowness met along the segment.
    Min,
}

/// Parameters in (0, 1) where the segment pa→pb crosses grid lines.
fn crossings(g: &RasterGeometry, pa: (f64, f64), pb: (f64, f64)) -> Vec<f64> {
    let mut ts = vec![0.0, 1.0];
    for (a, b, o) in [(pa.0, pb.0, g.origin.0), (pa.1, pb.1, g.origin.1)] {
        if a == b {
            continue;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let first = ((lo - o) / g.cell_size).ceil() as i64;
        let last = ((hi - o) / g.cell_size).floor() as i64;
        for k in first..=last {
            let t = (o + k as f64 * g.cell_size - a) / (b - a);
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts
}

fn edge_cost(v: &VelocityMap, a: (usize, usize), b: (usize, usize), mode: EdgeCost) -> f64 {
    let g = &v.geometry;
    let pa = g.cell_center(a.0, a.1);
    let pb = g.cell_center(b.0, b.1);
    let len = (pb.0 - pa.0).hypot(pb.1 - pa.1);
    let ts = crossings(g, pa, pb);
    let (mut sum, mut min) = (0.0, f64::INFINITY);
    for w in ts.windows(2) {
        if w[1] - w[0] < 1e-12 {
            continue;
        }
        let f = 0.5 * (w[0] + w[1]);
        let (c, r) = g.locate(pa.0 + f * (pb.0 - pa.0), pa.1 + f * (pb.1 - pa.1)).unwrap();
        let s = 1.0 / v.at(c, r);
        sum += (w[1] - w[0]) * s;
        min = min.min(s);
    }
    match mode {
        EdgeCost::Mean => len * sum,
        EdgeCost::Min => len * min,
    }
}

/// Shortest-path times from the cell containing `source` over the given
/// neighbour offsets.
pub fn dijkstra(v: &VelocityMap, source: (f64, f64), offsets: &[(isize, isize)], mode: EdgeCost) -> Vec<f64> {
    let g = &v.geometry;
    let (sc, sr) = g.locate(source.0, source.1).unwrap();
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    dist[g.index(sc, sr)] = 0.0;
    heap.push(Reverse((0u64, sc, sr)));
    while let Some(Reverse((bits, c, r))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[g.index(c, r)] {
            continue;
        }
        for &(dc, dr) in offsets {
            let (nc, nr) = (c as isize + dc, r as isize + dr);
            if nc < 0 || nr < 0 || nc >= g.nx as isize || nr >= g.ny as isize {
                continue;
            }
            let (nc, nr) = (nc as usize, nr as usize);
            let nd = d + edge_cost(v, (c, r), (nc, nr), mode);
            let k = g.index(nc, nr);
            if nd < dist[k] {
                dist[k] = nd;
                // Non-negative floats order like their bit patterns.
                heap.push(Reverse((nd.to_bits(), nc, nr)));
            }
        }
    }
    dist
}

/// A 32×32 map of free space with a few random discs at c/√5, and a source
/// cell centre in free space.
pub fn random_two_valued_map(seed: u64) -> (VelocityMap, (f64, f64)) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = RasterGeometry::new(32, 32, 1e-3, (0.0, 0.0)).unwrap();
    let slow = SPEED_OF_LIGHT / 5f64.sqrt();
    let discs: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| (rng.gen_range(0.0..0.032), rng.gen_range(0.0..0.032), rng.gen_range(0.003..0.010)))
        .collect();
    let speed: Vec<f64> = g
        .centers()
        .map(|(x, y)| {
            if discs.iter().any(|&(cx, cy, r)| (x - cx).hypot(y - cy) < r) {
                slow
            } else {
                SPEED_OF_LIGHT
            }
        })
        .collect();
    let vmap = VelocityMap::from_speeds(&g, speed).unwrap();
    loop {
        let (c, r) = (rng.gen_range(0..32), rng.gen_range(0..32));
        if vmap.at(c, r) == SPEED_OF_LIGHT {
            return (vmap, g.cell_center(c, r));
        }
    }
}

/// Worst ratio of graph path length to straight-line distance over all
/// directions, for a symmetric stencil set (cone decomposition between any
/// two stencil vectors).
pub fn graph_detour_factor(offsets: &[(isize, isize)]) -> f64 {
    let vs: Vec<(f64, f64)> = offsets.iter().map(|&(a, b)| (a as f64, b as f64)).collect();
    let mut worst: f64 = 1.0;
    const DIRS: usize = 7200;
    for i in 0..DIRS {
        let th = 2.0 * std::f64::consts::PI * i as f64 / DIRS as f64;
        let u = (th.cos(), th.sin());
        let mut best = f64::INFINITY;
        for a in &vs {
            for b in &vs {
                let det = a.0 * b.1 - a.1 * b.0;
                if det == 0.0 {
                    if a == b && (a.0 * u.1 - a.1 * u.0).abs() < 1e-12 && a.0 * u.0 + a.1 * u.1 > 0.0 {
                        best = best.min(1.0);
                    }
                    continue;
                }
                let x = (u.0 * b.1 - u.1 * b.0) / det;
                let y = (a.0 * u.1 - a.1 * u.0) / det;
                if x >= 0.0 && y >= 0.0 {
                    best = best.min(x * a.0.hypot(a.1) + y * b.0.hypot(b.1));
                }
            }
        }
        worst = worst.max(best);
    }
    worst
}
