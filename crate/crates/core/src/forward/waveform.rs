use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

/// Delay in units of 1/f_c; puts the Ricker onset below 2e-4 of its peak.
const ONSET_PERIODS: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Ricker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub kind: WaveformKind,
    /// Peak (centre) frequency, Hz.
    pub f_c: f64,
    pub amplitude: f64,
    /// Time of the pulse peak, s.
    pub delay: f64,
}

impl Waveform {
    /// Unit-amplitude Ricker wavelet whose spectrum peaks at `f_c`.
    pub fn ricker(f_c: f64) -> Self {
        Self {
            kind: WaveformKind::Ricker,
            f_c,
            amplitude: 1.0,
            delay: ONSET_PERIODS / f_c,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            WaveformKind::Ricker => {
                let a = (PI * self.f_c * (t - self.delay)).powi(2);
                self.amplitude * (1.0 - 2.0 * a) * (-a).exp()
            }
        }
    }
}

impl Waveform {
    /// Far-field pulse shape of a 2-D line source fed with this waveform:
    /// the half-order time derivative of the feed, computed spectrally.
    /// Returns samples on `t = m·dt` from t = 0 and the step `dt`.
    pub fn radiated_pulse(&self) -> (Vec<f64>, f64) {
        const N: usize = 1 << 14;
        let span = 32.0 * self.delay;
        let dt = span / N as f64;
        let mut buf: Vec<Complex<f64>> = (0..N)
            .map(|m| Complex::new(self.value(m as f64 * dt), 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(N).process(&mut buf);
        let rot = Complex::from_polar(1.0, PI / 4.0);
        for (k, c) in buf.iter_mut().enumerate() {
            let f = if k <= N / 2 { k as f64 } else { k as f64 - N as f64 };
            let omega = 2.0 * PI * f / span;
            *c *= if k == 0 || k == N / 2 {
                Complex::new(0.0, 0.0)
            } else if f > 0.0 {
                rot * omega.sqrt()
            } else {
                rot.conj() * (-omega).sqrt()
            };
        }
        planner.plan_fft_inverse(N).process(&mut buf);
        (buf.iter().map(|c| c.re / N as f64).collect(), dt)
    }

    /// Time of the radiated |peak| relative to `delay` (negative: the half
    /// derivative moves it earlier).
    pub fn radiated_peak_offset(&self) -> f64 {
        let (y, dt) = self.radiated_pulse();
        let m = (1..y.len() - 1)
            .max_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs()))
            .expect("non-empty");
        let (a, b, c) = (y[m - 1].abs(), y[m].abs(), y[m + 1].abs());
        let denom = a - 2.0 * b + c;
        let frac = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        (m as f64 + frac) * dt - self.delay
    }

    /// Time at which the radiated pulse first reaches `fraction` of its
    /// |peak|, relative to `delay`.
    pub fn radiated_onset_offset(&self, fraction: f64) -> f64 {
        let (y, dt) = self.radiated_pulse();
        let level = fraction * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m = y.iter().position(|v| v.abs() >= level).expect("peak exists");
        let (a, b) = (y[m.saturating_sub(1)].abs(), y[m].abs());
        let frac = if m > 0 && b > a { (level - a) / (b - a) } else { 1.0 };
        (m as f64 - 1.0 + frac) * dt - self.delay
    }
}

impl Default for Waveform {
    fn default() -> Self {
        Self::ricker(1.5e9)
    }
}

/// Samples a unit Ricker at `t = m·dt`, `m = 0..n_steps`.
pub fn make_waveform(f_c: f64, dt: f64, n_steps: usize) -> Vec<f64> {
    let w = Waveform::ricker(f_c);
    (0..n_steps).map(|m| w.value(m as f64 * dt)).collect()
}
