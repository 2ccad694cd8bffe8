use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{ArrayGeometry, SimConfig, Waveform};
use crate::phantom::{Contour, PhantomSpec};

/// Simulation parameters as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub cell_size: f64,
    pub courant_factor: f64,
    pub record_window: f64,
    pub pml_cells: usize,
    pub center_frequency: f64,
    pub elements: usize,
    pub ring_radius: f64,
    pub spacing: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        let a = ArrayGeometry::default();
        Self {
            cell_size: 1e-3,
            courant_factor: 0.95,
            record_window: 8e-9,
            pml_cells: 10,
            center_frequency: Waveform::default().f_c,
            elements: a.elements,
            ring_radius: a.ring_radius,
            spacing: a.spacing,
        }
    }
}

impl SimSettings {
    pub fn sim_config(&self) -> Result<SimConfig> {
        SimConfig::new(self.cell_size, self.courant_factor, self.record_window, self.pml_cells)
    }

    pub fn array(&self) -> ArrayGeometry {
        ArrayGeometry {
            elements: self.elements,
            ring_radius: self.ring_radius,
            spacing: self.spacing,
            ..ArrayGeometry::default()
        }
    }

    pub fn waveform(&self) -> Result<Waveform> {
        if !(self.center_frequency > 0.0 && self.center_frequency.is_finite()) {
            return Err(Error::Config(format!("center frequency {} must be positive", self.center_frequency)));
        }
        Ok(Waveform::ricker(self.center_frequency))
    }
}

/// A phantom plus the simulation it is meant for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub id: String,
    #[serde(default)]
    pub sim: SimSettings,
    pub phantom: PhantomSpec,
}

impl SceneFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serialises")
    }
}

pub fn save_scene(path: &Path, scene: &SceneFile) -> Result<()> {
    super::write_file(path, scene.to_toml().as_bytes())
}

pub fn load_scene(path: &Path) -> Result<SceneFile> {
    let text = String::from_utf8(super::read_file(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    let scene: SceneFile = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    scene.phantom.validate()?;
    Ok(scene)
}

pub fn save_contour(path: &Path, contour: &Contour) -> Result<()> {
    super::write_file(path, &serde_json::to_vec(contour).expect("contour serialises"))
}

pub fn load_contour(path: &Path) -> Result<Contour> {
    serde_json::from_slice(&super::read_file(path)?).map_err(|e| Error::format(path, e.to_string()))
}
