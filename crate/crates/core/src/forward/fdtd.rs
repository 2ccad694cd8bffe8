//! 2-D TMz Yee solver with a convolutional PML.
//!
//! Ez lives on the nodes, which coincide with scene cell centres; Hx sits at
//! (i, j + 1/2) and Hy at (i + 1/2, j). The scene raster is padded by
//! `pml_cells` on every side, with materials extended from the nearest edge
//! cell, and the outermost nodes are PEC.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::array::ArrayGeometry;
use super::trace::{Sinogram, Trace};
use super::waveform::Waveform;
use crate::error::{Error, Result};
use crate::grid::{RasterGeometry, SPEED_OF_LIGHT};
use crate::phantom::{TissueLabel, TissueMap};

pub const MU0: f64 = 1.256_637_062_12e-6;
pub const EPS0: f64 = 1.0 / (MU0 * SPEED_OF_LIGHT * SPEED_OF_LIGHT);
const ETA0: f64 = MU0 * SPEED_OF_LIGHT;

const PML_ORDER: f64 = 3.0;
const PML_ALPHA_MAX: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cell_size: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub pml_cells: usize,
    pub courant_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::new(1e-3, 0.95, 8e-9, 10).expect("default config is valid")
    }
}

impl SimConfig {
    /// Time step at `courant_factor` of the 2-D stability limit and enough
    /// steps to cover `record_window` seconds.
    pub fn new(cell_size: f64, courant_factor: f64, record_window: f64, pml_cells: usize) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Config(format!("cell size {cell_size} must be positive")));
        }
        if !(courant_factor > 0.0 && courant_factor < 1.0) {
            return Err(Error::Config(format!("courant factor {courant_factor} not in (0, 1)")));
        }
        let dt = courant_factor * cell_size / (SPEED_OF_LIGHT * 2f64.sqrt());
        let n_steps = (record_window / dt).ceil() as usize + 1;
        let cfg = Self {
            cell_size,
            dt,
            n_steps,
            pml_cells,
            courant_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn courant_limit(&self) -> f64 {
        self.courant_factor * self.cell_size / (SPEED_OF_LIGHT * 2f64.sqrt())
    }

    pub fn record_window(&self) -> f64 {
        self.n_steps.saturating_sub(1) as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.courant_factor > 0.0 && self.courant_factor < 1.0) {
            return Err(Error::Config(format!(
                "courant factor {} not in (0, 1)",
                self.courant_factor
            )));
        }
        let limit = self.courant_limit();
        if !(self.dt > 0.0) || self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Stability { dt: self.dt, limit });
        }
        if self.n_steps < 2 {
            return Err(Error::Config("need at least two time steps".into()));
        }
        if self.pml_cells < 2 {
            return Err(Error::Config("need at least two PML cells".into()));
        }
        Ok(())
    }

    /// Fails when the record window is shorter than the round trip across
    /// the ring diameter through `scene`.
    pub fn check_record_window(&self, scene: &TissueMap, geom: &ArrayGeometry) -> Result<()> {
        let need = required_record_window(scene, geom);
        if self.record_window() < need {
            return Err(Error::Config(format!(
                "record window {:.3e} s shorter than the {:.3e} s round trip across the ring",
                self.record_window(),
                need
            )));
        }
        Ok(())
    }

    /// Scene raster this configuration simulates on.
    pub fn scene_raster(&self) -> Result<RasterGeometry> {
        RasterGeometry::scene_with_cell(self.cell_size)
    }
}

/// Bilinear injection/sampling stencil on the Ez nodes.
#[derive(Debug, Clone, Copy)]
pub struct Probe {
    nodes: [usize; 4],
    weights: [f64; 4],
}

/// Precomputed update coefficients for one scene.
#[derive(Debug, Clone)]
pub struct FdtdModel {
    nx: usize,
    ny: usize,
    pml: usize,
    h: f64,
    dt: f64,
    origin: (f64, f64),
    eps_r: Vec<f64>,
    ca: Vec<f64>,
    cb: Vec<f64>,
    ch: f64,
    be_x: Vec<f64>,
    ce_x: Vec<f64>,
    bh_x: Vec<f64>,
    chx: Vec<f64>,
    be_y: Vec<f64>,
    ce_y: Vec<f64>,
    bh_y: Vec<f64>,
    chy: Vec<f64>,
}

/// Field arrays of one run.
#[derive(Debug, Clone)]
pub struct FdtdState {
    pub ez: Vec<f64>,
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    psi_ezx: Vec<f64>,
    psi_ezy: Vec<f64>,
    psi_hx: Vec<f64>,
    psi_hy: Vec<f64>,
    steps: usize,
}

fn pml_coeffs(depth: f64, thickness: f64, dt: f64, sigma_max: f64) -> (f64, f64) {
    if depth <= 0.0 {
        return (1.0, 0.0);
    }
    let rel = (depth / thickness).min(1.0);
    let sigma = sigma_max * rel.powf(PML_ORDER);
    let alpha = PML_ALPHA_MAX * (1.0 - rel);
    let b = (-(sigma + alpha) * dt / EPS0).exp();
    let c = sigma / (sigma + alpha) * (b - 1.0);
    (b, c)
}

impl FdtdModel {
    pub fn new(scene: &TissueMap, cfg: &SimConfig) -> Result<Self> {
        Self::on_raster(scene, &cfg.scene_raster()?, cfg)
    }

    /// Model over an arbitrary raster (cell size must match `cfg`); the scene
    /// is resampled by nearest label, free space where it has no coverage.
    pub fn on_raster(scene: &TissueMap, raster: &RasterGeometry, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        scene.validate()?;
        if (raster.cell_size - cfg.cell_size).abs() > 1e-12 * cfg.cell_size {
            return Err(Error::ShapeMismatch(format!(
                "raster cell {} differs from configured cell {}",
                raster.cell_size, cfg.cell_size
            )));
        }
        let raster = *raster;
        let labels: Vec<TissueLabel> = if scene.geometry.same_as(&raster) {
            scene.labels.clone()
        } else {
            raster.centers().map(|(x, y)| scene.label_near(x, y)).collect()
        };
        let p = cfg.pml_cells;
        let (nx, ny) = (raster.nx + 2 * p, raster.ny + 2 * p);
        let (h, dt) = (cfg.cell_size, cfg.dt);
        let mut eps_r = vec![0.0; nx * ny];
        let mut ca = vec![0.0; nx * ny];
        let mut cb = vec![0.0; nx * ny];
        for j in 0..ny {
            let sj = j.saturating_sub(p).min(raster.ny - 1);
            for i in 0..nx {
                let si = i.saturating_sub(p).min(raster.nx - 1);
                let k = j * nx + i;
                let label = labels[raster.index(si, sj)];
                let boundary = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
                if label == TissueLabel::Pec || boundary {
                    continue;
                }
                let props = scene.props.get(label).expect("validated");
                let eps = props.eps_r * EPS0;
                let loss = props.sigma * dt / (2.0 * eps);
                eps_r[k] = props.eps_r;
                ca[k] = (1.0 - loss) / (1.0 + loss);
                cb[k] = dt / (eps * h) / (1.0 + loss);
            }
        }

        let thickness = p as f64 * h;
        let sigma_max = 0.8 * (PML_ORDER + 1.0) / (ETA0 * h);
        // Depth into the PML of a node at (possibly half-integer) index `pos`
        // along an axis of `n` nodes.
        let depth = |pos: f64, n: usize| -> f64 {
            let lo = p as f64;
            let hi = (n - 1 - p) as f64;
            if pos < lo {
                (lo - pos) * h
            } else if pos > hi {
                (pos - hi) * h
            } else {
                0.0
            }
        };
        let profile = |n: usize, half: f64| -> (Vec<f64>, Vec<f64>) {
            (0..n)
                .map(|i| pml_coeffs(depth(i as f64 + half, n), thickness, dt, sigma_max))
                .unzip()
        };
        let (be_x, ce_x) = profile(nx, 0.0);
        let (bh_x, chx) = profile(nx, 0.5);
        let (be_y, ce_y) = profile(ny, 0.0);
        let (bh_y, chy) = profile(ny, 0.5);

        Ok(Self {
            nx,
            ny,
            pml: p,
            h,
            dt,
            origin: (
                raster.origin.0 + (0.5 - p as f64) * h,
                raster.origin.1 + (0.5 - p as f64) * h,
            ),
            eps_r,
            ca,
            cb,
            ch: dt / (MU0 * h),
            be_x,
            ce_x,
            bh_x,
            chx,
            be_y,
            ce_y,
            bh_y,
            chy,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cell_size(&self) -> f64 {
        self.h
    }

    /// Bilinear stencil for a point, which must lie inside the scene region
    /// (outside the PML).
    pub fn probe(&self, x: f64, y: f64) -> Result<Probe> {
        let fx = (x - self.origin.0) / self.h;
        let fy = (y - self.origin.1) / self.h;
        let lo = self.pml as f64;
        if !(fx >= lo && fy >= lo && fx < (self.nx - 1 - self.pml) as f64 && fy < (self.ny - 1 - self.pml) as f64) {
            return Err(Error::OutOfDomain { x, y });
        }
        let (i0, j0) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let k = j0 * self.nx + i0;
        Ok(Probe {
            nodes: [k, k + 1, k + self.nx, k + self.nx + 1],
            weights: [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
        })
    }

    pub fn new_state(&self) -> FdtdState {
        let n = self.nx * self.ny;
        FdtdState {
            ez: vec![0.0; n],
            hx: vec![0.0; n],
            hy: vec![0.0; n],
            psi_ezx: vec![0.0; n],
            psi_ezy: vec![0.0; n],
            psi_hx: vec![0.0; n],
            psi_hy: vec![0.0; n],
            steps: 0,
        }
    }

    /// Advances one leapfrog step. The soft source adds `value` (the
    /// waveform at the half step) to Ez after the curl update.
    pub fn step(&self, st: &mut FdtdState, source: Option<(&Probe, f64)>) {
        let (nx, ny, p) = (self.nx, self.ny, self.pml);
        let ch = self.ch;

        // H from curl E.
        for j in 0..ny - 1 {
            let r = j * nx;
            let (ez0, ez1) = (&st.ez[r..r + nx], &st.ez[r + nx..r + 2 * nx]);
            let hx = &mut st.hx[r..r + nx];
            for i in 0..nx {
                hx[i] -= ch * (ez1[i] - ez0[i]);
            }
        }
        for j in 0..ny {
            let r = j * nx;
            let ez = &st.ez[r..r + nx];
            let hy = &mut st.hy[r..r + nx];
            for i in 0..nx - 1 {
                hy[i] += ch * (ez[i + 1] - ez[i]);
            }
        }
        for j in (0..p).chain(ny - 1 - p..ny - 1) {
            let (b, c) = (self.bh_y[j], self.chy[j]);
            for i in 0..nx {
                let k = j * nx + i;
                let psi = b * st.psi_hx[k] + c * (st.ez[k + nx] - st.ez[k]);
                st.psi_hx[k] = psi;
                st.hx[k] -= ch * psi;
            }
        }
        for j in 0..ny {
            for i in (0..p).chain(nx - 1 - p..nx - 1) {
                let k = j * nx + i;
                let psi = self.bh_x[i] * st.psi_hy[k] + self.chx[i] * (st.ez[k + 1] - st.ez[k]);
                st.psi_hy[k] = psi;
                st.hy[k] += ch * psi;
            }
        }

        // E from curl H.
        for j in 1..ny - 1 {
            let r = j * nx;
            let hx_lo = &st.hx[r - nx..r];
            let hx_hi = &st.hx[r..r + nx];
            let hy = &st.hy[r..r + nx];
            let ca = &self.ca[r..r + nx];
            let cb = &self.cb[r..r + nx];
            let ez = &mut st.ez[r..r + nx];
            for i in 1..nx - 1 {
                ez[i] = ca[i] * ez[i] + cb[i] * ((hy[i] - hy[i - 1]) - (hx_hi[i] - hx_lo[i]));
            }
        }
        for j in 1..ny - 1 {
            for i in (1..p).chain(nx - p..nx - 1) {
                let k = j * nx + i;
                let psi = self.be_x[i] * st.psi_ezx[k] + self.ce_x[i] * (st.hy[k] - st.hy[k - 1]);
                st.psi_ezx[k] = psi;
                st.ez[k] += self.cb[k] * psi;
            }
        }
        for j in (1..p).chain(ny - p..ny - 1) {
            let (b, c) = (self.be_y[j], self.ce_y[j]);
            for i in 1..nx - 1 {
                let k = j * nx + i;
                let psi = b * st.psi_ezy[k] + c * (st.hx[k] - st.hx[k - nx]);
                st.psi_ezy[k] = psi;
                st.ez[k] -= self.cb[k] * psi;
            }
        }

        if let Some((probe, value)) = source {
            for (&k, &w) in probe.nodes.iter().zip(&probe.weights) {
                if self.cb[k] != 0.0 {
                    st.ez[k] += w * value;
                }
            }
        }
        st.steps += 1;
    }

    pub fn sample(&self, st: &FdtdState, probe: &Probe) -> f64 {
        probe.nodes.iter().zip(&probe.weights).map(|(&k, &w)| w * st.ez[k]).sum()
    }

    /// Discrete field energy ½h²(ε E^n·E^(n+1) + μ |H^(n+½)|²), which the
    /// lossless Yee update conserves exactly. `ez_prev` holds Ez from before
    /// the last step.
    pub fn energy(&self, st: &FdtdState, ez_prev: &[f64]) -> f64 {
        let e: f64 = st
            .ez
            .iter()
            .zip(ez_prev)
            .zip(&self.eps_r)
            .map(|((a, b), eps)| eps * a * b)
            .sum();
        let m: f64 = st.hx.iter().chain(&st.hy).map(|h| h * h).sum();
        0.5 * self.h * self.h * (e * EPS0 + m * MU0)
    }

    /// Runs the full record with a soft source at `tx` and returns Ez sampled
    /// at every receiver; sample `m` is the field at step `m`.
    pub fn run(&self, tx: &Probe, receivers: &[Probe], waveform: &Waveform, n_steps: usize) -> Vec<Vec<f64>> {
        let mut st = self.new_state();
        let mut out: Vec<Vec<f64>> = receivers.iter().map(|_| Vec::with_capacity(n_steps)).collect();
        for (rec, probe) in out.iter_mut().zip(receivers) {
            rec.push(self.sample(&st, probe));
        }
        for n in 0..n_steps - 1 {
            let t = (n as f64 + 0.5) * self.dt;
            self.step(&mut st, Some((tx, waveform.value(t))));
            for (rec, probe) in out.iter_mut().zip(receivers) {
                rec.push(self.sample(&st, probe));
            }
        }
        out
    }
}

/// Longest two-way travel time along four ring diameters (0°, 45°, 90°,
/// 135°), integrating the slowness of the scene materials; PEC counts as air.
pub fn required_record_window(scene: &TissueMap, geom: &ArrayGeometry) -> f64 {
    let steps = (4.0 * geom.ring_radius / scene.geometry.cell_size).ceil().max(1.0) as usize;
    (0..4)
        .map(|k| {
            let (s, c) = (k as f64 * PI / 4.0).sin_cos();
            let ds = 2.0 * geom.ring_radius / steps as f64;
            let one_way: f64 = (0..steps)
                .map(|m| {
                    let u = -geom.ring_radius + (m as f64 + 0.5) * ds;
                    let (x, y) = (geom.center.0 + u * c, geom.center.1 + u * s);
                    let eps = scene.props.get(scene.label_near(x, y)).map_or(1.0, |p| p.eps_r);
                    eps.sqrt() * ds / SPEED_OF_LIGHT
                })
                .sum();
            2.0 * one_way
        })
        .fold(0.0, f64::max)
}

/// Trace time axis: zero when the radiated pulse peak leaves the source, so
/// a direct wave at range r peaks near t = r/c.
fn trace_t0(waveform: &Waveform) -> f64 {
    -(waveform.delay + waveform.radiated_peak_offset())
}

/// One monostatic run: soft source at `tx`, Ez recorded at `rx`.
pub fn simulate_trace(
    scene: &TissueMap,
    tx: (f64, f64),
    rx: (f64, f64),
    waveform: &Waveform,
    cfg: &SimConfig,
) -> Result<Trace> {
    let mut traces = simulate_receivers(scene, tx, &[rx], waveform, cfg)?;
    Ok(traces.remove(0))
}

/// One source, several receivers, one run.
pub fn simulate_receivers(
    scene: &TissueMap,
    tx: (f64, f64),
    receivers: &[(f64, f64)],
    waveform: &Waveform,
    cfg: &SimConfig,
) -> Result<Vec<Trace>> {
    let model = FdtdModel::new(scene, cfg)?;
    let src = model.probe(tx.0, tx.1)?;
    let probes = receivers
        .iter()
        .map(|&(x, y)| model.probe(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(model
        .run(&src, &probes, waveform, cfg.n_steps)
        .into_iter()
        .map(|samples| Trace {
            samples,
            dt: cfg.dt,
            t0: trace_t0(waveform),
            element_index: 0,
        })
        .collect())
}

/// All `M` elements, each active alone. Runs are independent and may execute
/// in parallel; traces come back ordered by element index.
pub fn simulate_scan(
    scene: &TissueMap,
    geom: &ArrayGeometry,
    waveform: &Waveform,
    cfg: &SimConfig,
    scene_id: &str,
) -> Result<Sinogram> {
    cfg.check_record_window(scene, geom)?;
    let model = FdtdModel::new(scene, cfg)?;
    let probes = (0..geom.elements)
        .map(|i| {
            let (t, r) = (geom.tx(i), geom.rx(i));
            Ok((model.probe(t.0, t.1)?, model.probe(r.0, r.1)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let traces = probes
        .par_iter()
        .enumerate()
        .map(|(i, (src, rcv))| {
            let samples = model
                .run(src, std::slice::from_ref(rcv), waveform, cfg.n_steps)
                .remove(0);
            Trace {
                samples,
                dt: cfg.dt,
                t0: trace_t0(waveform),
                element_index: i,
            }
        })
        .collect();
    Sinogram::new(traces, *geom, scene_id.to_string(), false)
}

/// Centred PEC cylinder in free space, for time-axis calibration.
pub fn pec_cylinder_scene(raster: &RasterGeometry, center: (f64, f64), radius: f64) -> TissueMap {
    let mut map = TissueMap::empty(raster, &Default::default());
    map.paint_disc(center, radius, TissueLabel::Pec);
    map
}
