//! FDTD forward model for the circular monostatic array.

mod array;
mod calibrate;
mod fdtd;
mod trace;
mod waveform;

pub use array::ArrayGeometry;
pub use calibrate::{apply_time_offset, freespace_calibrate, time_axis_calibrate};
pub use fdtd::{
    pec_cylinder_scene, required_record_window, simulate_receivers, simulate_scan, simulate_trace, FdtdModel,
    FdtdState, Probe, SimConfig, EPS0, MU0,
};
pub use trace::{Sinogram, Trace};
pub use waveform::{make_waveform, Waveform, WaveformKind};
