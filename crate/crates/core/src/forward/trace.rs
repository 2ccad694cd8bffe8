use serde::{Deserialize, Serialize};

use super::array::ArrayGeometry;
use crate::error::{Error, Result};

/// Uniformly sampled receive signal; sample `m` is at `t0 + m·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub t0: f64,
    pub element_index: usize,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Index of the earliest sample whose magnitude exceeds `fraction` of the
    /// global absolute peak.
    pub fn first_arrival_index(&self, fraction: f64) -> Option<usize> {
        let level = fraction * self.peak_abs();
        if level <= 0.0 {
            return None;
        }
        self.samples.iter().position(|v| v.abs() > level)
    }

    /// First-arrival time with the threshold crossing interpolated linearly
    /// between the first exceeding sample and its predecessor.
    pub fn first_arrival(&self, fraction: f64) -> Option<f64> {
        let m = self.first_arrival_index(fraction)?;
        let level = fraction * self.peak_abs();
        if m == 0 {
            return Some(self.time(0));
        }
        let (a, b) = (self.samples[m - 1].abs(), self.samples[m].abs());
        let frac = if b > a { (level - a) / (b - a) } else { 1.0 };
        Some(self.time(m - 1) + frac.clamp(0.0, 1.0) * self.dt)
    }

    /// Time of the largest |sample|, refined by a parabola through the peak
    /// and its neighbours.
    pub fn peak_time(&self) -> Option<f64> {
        let (m, _) = self
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))?;
        if m == 0 || m + 1 >= self.samples.len() {
            return Some(self.time(m));
        }
        let (a, b, c) = (
            self.samples[m - 1].abs(),
            self.samples[m].abs(),
            self.samples[m + 1].abs(),
        );
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        Some(self.time(m) + shift.clamp(-0.5, 0.5) * self.dt)
    }
}

/// One tomographic scan: a trace per array element, ordered by element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub traces: Vec<Trace>,
    pub geometry: ArrayGeometry,
    pub scene_id: String,
    pub calibrated: bool,
}

impl Sinogram {
    /// Checks one trace per element with shared `dt`, `t0` and length.
    pub fn new(traces: Vec<Trace>, geometry: ArrayGeometry, scene_id: String, calibrated: bool) -> Result<Self> {
        if traces.len() != geometry.elements {
            return Err(Error::ShapeMismatch(format!(
                "{} traces for {} elements",
                traces.len(),
                geometry.elements
            )));
        }
        if let Some(first) = traces.first() {
            if !(first.dt > 0.0) {
                return Err(Error::ShapeMismatch("trace dt must be positive".into()));
            }
            for (i, t) in traces.iter().enumerate() {
                if t.dt != first.dt || t.len() != first.len() || t.t0 != first.t0 {
                    return Err(Error::ShapeMismatch(format!("trace {i} sampling differs from trace 0")));
                }
                if t.element_index != i {
                    return Err(Error::ShapeMismatch(format!(
                        "trace {i} carries element index {}",
                        t.element_index
                    )));
                }
                if t.samples.iter().any(|v| !v.is_finite()) {
                    return Err(Error::ShapeMismatch(format!("trace {i} has non-finite samples")));
                }
            }
        }
        Ok(Self {
            traces,
            geometry,
            scene_id,
            calibrated,
        })
    }

    pub fn elements(&self) -> usize {
        self.traces.len()
    }

    pub fn samples_per_trace(&self) -> usize {
        self.traces.first().map_or(0, Trace::len)
    }

    pub fn dt(&self) -> f64 {
        self.traces.first().map_or(0.0, |t| t.dt)
    }

    pub fn t0(&self) -> f64 {
        self.traces.first().map_or(0.0, |t| t.t0)
    }

    /// Root-mean-square over every sample of every trace.
    pub fn rms(&self) -> f64 {
        let n: usize = self.traces.iter().map(Trace::len).sum();
        if n == 0 {
            return 0.0;
        }
        let ss: f64 = self.traces.iter().flat_map(|t| &t.samples).map(|v| v * v).sum();
        (ss / n as f64).sqrt()
    }

    /// `a·self + b·other`, sample-wise.
    pub fn combine(&self, a: f64, other: &Sinogram, b: f64) -> Result<Sinogram> {
        self.check_compatible(other)?;
        let traces = self
            .traces
            .iter()
            .zip(&other.traces)
            .map(|(x, y)| Trace {
                samples: x.samples.iter().zip(&y.samples).map(|(p, q)| a * p + b * q).collect(),
                ..x.clone()
            })
            .collect();
        Ok(Sinogram {
            traces,
            geometry: self.geometry,
            scene_id: self.scene_id.clone(),
            calibrated: self.calibrated,
        })
    }

    pub(crate) fn check_compatible(&self, other: &Sinogram) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::ShapeMismatch("array geometries differ".into()));
        }
        if self.elements() != other.elements()
            || self.samples_per_trace() != other.samples_per_trace()
            || self.dt() != other.dt()
            || self.t0() != other.t0()
        {
            return Err(Error::ShapeMismatch("trace sampling differs".into()));
        }
        Ok(())
    }
}
