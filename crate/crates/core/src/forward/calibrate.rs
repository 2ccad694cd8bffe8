use super::trace::Sinogram;
use crate::error::{Error, Result};
use crate::grid::SPEED_OF_LIGHT;

/// Coherent subtraction of the empty-scene response, element by element.
pub fn freespace_calibrate(raw: &Sinogram, free: &Sinogram) -> Result<Sinogram> {
    raw.check_compatible(free)?;
    let mut out = raw.combine(1.0, free, -1.0)?;
    out.calibrated = true;
    Ok(out)
}

/// Fits the trace time offset from echoes of centred PEC cylinders.
///
/// Each entry is a calibrated scan of one cylinder with its radius. The echo
/// delay of a cylinder is the mean over elements of the peak time of
/// |trace|; delays are fitted to `2·(ring_radius − a)/c + t0` in the least
/// squares sense and `t0` is returned.
pub fn time_axis_calibrate(pec: &[(Sinogram, f64)]) -> Result<f64> {
    if pec.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "time-axis calibration needs at least two cylinders, got {}",
            pec.len()
        )));
    }
    let mut radii: Vec<f64> = pec.iter().map(|(_, a)| *a).collect();
    radii.sort_by(f64::total_cmp);
    if radii.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InsufficientData("cylinder radii must be distinct".into()));
    }

    let mut residual_terms = Vec::with_capacity(pec.len());
    let mut window = 0.0f64;
    for (sino, radius) in pec {
        if sino.elements() == 0 {
            return Err(Error::InsufficientData("empty calibration scan".into()));
        }
        let mut sum = 0.0;
        for trace in &sino.traces {
            sum += trace
                .peak_time()
                .ok_or_else(|| Error::InsufficientData("empty trace".into()))?;
        }
        let delay = sum / sino.elements() as f64;
        let model = 2.0 * (sino.geometry.ring_radius - radius) / SPEED_OF_LIGHT;
        residual_terms.push(delay - model);
        window = window.max(sino.samples_per_trace() as f64 * sino.dt());
    }
    let t0 = residual_terms.iter().sum::<f64>() / residual_terms.len() as f64;
    let rms = (residual_terms.iter().map(|r| (r - t0).powi(2)).sum::<f64>() / residual_terms.len() as f64).sqrt();
    if rms > 0.1 * window {
        return Err(Error::Fit(format!(
            "echo delays deviate from the two-way model by {rms:e} s RMS"
        )));
    }
    Ok(t0)
}

/// Shifts every trace's time axis so that a fitted offset `t0` maps to zero.
pub fn apply_time_offset(sino: &Sinogram, t0: f64) -> Sinogram {
    let mut out = sino.clone();
    for trace in &mut out.traces {
        trace.t0 -= t0;
    }
    out
}
