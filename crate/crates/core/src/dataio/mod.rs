//! File formats and dataset orchestration.
//!
//! * LSR1 rasters for images, velocity maps, masks and probabilities.
//! * LSS1 sinograms (f64 payload, JSON header).
//! * TOML scene and dataset configs, JSON contours and manifests.

mod dataset;
mod evaluate;
mod raster;
mod scene;
mod sinogram;

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use dataset::{
    generate_dataset, image_methods, load_image, sample_seed, split_by_phantom, vmap_from_raster, vmap_raster,
    DatasetConfig, FileRef, GenerateOutcome, Manifest, SampleRecord, Split, CALIBRATION_DIR,
};
pub use evaluate::{evaluate_dirs, write_roc_table, EvaluationReport};
pub use raster::{
    export_png, load_raster, quantize_u8, save_raster, sidecar_path, RasterData, RasterDtype, RasterFile,
    RasterMeta, RASTER_MAGIC,
};
pub use scene::{load_contour, load_scene, save_contour, save_scene, SceneFile, SimSettings};
pub use sinogram::{load_sinogram, save_sinogram, sinogram_from_bytes, sinogram_to_bytes, SINOGRAM_MAGIC};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary sibling and renames, so an interrupted run
/// never leaves a half-written file under the final name.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".part");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&read_file(path)?))
}
