//! Microwave limb imaging across an air gap.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`phantom`]: layered limb phantoms with a fluid inclusion, surface contours
//!   and contour-derived velocity maps.
//! * [`forward`]: a 2-D TMz FDTD solver that produces monostatic backscatter
//!   traces for a circular array, with free-space and time-axis calibration.
//! * [`eikonal`]: fast-marching first-arrival travel times on heterogeneous
//!   velocity maps.
//! * [`backproject`]: time-domain backprojection with straight-ray (ToF) or
//!   eikonal (contour-guided, CGLI) delays.
//! * [`metrics`]: pooled pixel-wise ROC, F1, IoU and BCE, plus a non-learned
//!   threshold detector.
//! * [`dataio`]: the LSR1 raster format, scene files, dataset generation and
//!   manifests.

pub mod backproject;
pub mod dataio;
pub mod eikonal;
pub mod error;
pub mod forward;
pub mod grid;
pub mod metrics;
pub mod phantom;

pub use error::{Error, Result};
pub use grid::{RasterGeometry, SPEED_OF_LIGHT};
