use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TissueLabel {
    Air,
    Skin,
    Fat,
    Muscle,
    Bone,
    Fluid,
    /// Perfect electric conductor, only used by calibration scenes.
    Pec,
}

impl TissueLabel {
    pub const ALL: [TissueLabel; 7] = [
        TissueLabel::Air,
        TissueLabel::Skin,
        TissueLabel::Fat,
        TissueLabel::Muscle,
        TissueLabel::Bone,
        TissueLabel::Fluid,
        TissueLabel::Pec,
    ];

    /// Stable byte code used by the u8 raster encoding.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueLabel::Air => "air",
            TissueLabel::Skin => "skin",
            TissueLabel::Fat => "fat",
            TissueLabel::Muscle => "muscle",
            TissueLabel::Bone => "bone",
            TissueLabel::Fluid => "fluid",
            TissueLabel::Pec => "pec",
        }
    }
}

/// Relative permittivity and conductivity (S/m) of a non-PEC material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricProps {
    pub eps_r: f64,
    pub sigma: f64,
}

impl DielectricProps {
    pub const fn new(eps_r: f64, sigma: f64) -> Self {
        Self { eps_r, sigma }
    }

    /// Phase speed ignoring loss, c/sqrt(eps_r).
    pub fn speed(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.eps_r.sqrt()
    }

    fn validate(&self, label: TissueLabel) -> Result<()> {
        if !(self.eps_r.is_finite() && self.eps_r >= 1.0) {
            return Err(Error::Config(format!(
                "{}: eps_r must be >= 1, got {}",
                label.name(),
                self.eps_r
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "{}: sigma must be >= 0, got {}",
                label.name(),
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Default properties at 1.5 GHz. `None` for PEC, which has no finite
/// permittivity.
pub fn tissue_properties(label: TissueLabel) -> Option<DielectricProps> {
    let props = match label {
        TissueLabel::Air => DielectricProps::new(1.0, 0.0),
        TissueLabel::Skin => DielectricProps::new(39.0, 0.90),
        TissueLabel::Fat => DielectricProps::new(5.3, 0.05),
        TissueLabel::Muscle => DielectricProps::new(54.0, 1.20),
        TissueLabel::Bone => DielectricProps::new(12.0, 0.16),
        TissueLabel::Fluid => DielectricProps::new(69.0, 1.60),
        TissueLabel::Pec => return None,
    };
    Some(props)
}

/// Per-label property table. Starts from [`tissue_properties`] and can be
/// overridden from a scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<TissueLabel, DielectricProps>", into = "BTreeMap<TissueLabel, DielectricProps>")]
pub struct PropertyTable {
    entries: BTreeMap<TissueLabel, DielectricProps>,
}

impl Default for PropertyTable {
    fn default() -> Self {
        let entries = TissueLabel::ALL
            .iter()
            .filter_map(|&l| tissue_properties(l).map(|p| (l, p)))
            .collect();
        Self { entries }
    }
}

impl PropertyTable {
    pub fn get(&self, label: TissueLabel) -> Option<DielectricProps> {
        self.entries.get(&label).copied()
    }

    pub fn set(&mut self, label: TissueLabel, props: DielectricProps) -> Result<()> {
        if label == TissueLabel::Pec {
            return Err(Error::Config("PEC has no dielectric properties".into()));
        }
        props.validate(label)?;
        self.entries.insert(label, props);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (TissueLabel, DielectricProps)> + '_ {
        self.entries.iter().map(|(&l, &p)| (l, p))
    }
}

impl TryFrom<BTreeMap<TissueLabel, DielectricProps>> for PropertyTable {
    type Error = Error;

    fn try_from(map: BTreeMap<TissueLabel, DielectricProps>) -> Result<Self> {
        let mut table = PropertyTable::default();
        for (label, props) in map {
            table.set(label, props)?;
        }
        Ok(table)
    }
}

impl From<PropertyTable> for BTreeMap<TissueLabel, DielectricProps> {
    fn from(table: PropertyTable) -> Self {
        table.entries
    }
}
