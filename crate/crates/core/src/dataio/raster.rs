//! LSR1 rasters: a 40-byte little-endian header followed by a row-major
//! payload, with an optional JSON sidecar (`<file>.json`) for metadata.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "LSR1"
//!      4     1  dtype (0 = f32, 1 = u8)
//!      5     1  endianness (0 = little)
//!      6     2  reserved, zero
//!      8     4  nx (u32)
//!     12     4  ny (u32)
//!     16     8  cell_size, m (f64)
//!     24     8  origin x, m (f64)
//!     32     8  origin y, m (f64)
//!     40     -  payload, nx * ny values
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RasterGeometry;

pub const RASTER_MAGIC: &[u8; 4] = b"LSR1";
const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterDtype {
    F32,
    U8,
}

impl RasterDtype {
    fn code(self) -> u8 {
        match self {
            RasterDtype::F32 => 0,
            RasterDtype::U8 => 1,
        }
    }

    fn size(self) -> usize {
        match self {
            RasterDtype::F32 => 4,
            RasterDtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl RasterData {
    pub fn dtype(&self) -> RasterDtype {
        match self {
            RasterData::F32(_) => RasterDtype::F32,
            RasterData::U8(_) => RasterDtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RasterData::F32(v) => v.len(),
            RasterData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            RasterData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            RasterData::U8(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }
}

/// Sidecar metadata. `params` holds free-form stage parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RasterMeta {
    #[serde(default)]
    pub scene_id: String,
    #[serde(default)]
    pub stage: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterFile {
    pub geometry: RasterGeometry,
    pub data: RasterData,
    pub meta: RasterMeta,
}

impl RasterFile {
    pub fn new(geometry: RasterGeometry, data: RasterData, meta: RasterMeta) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} raster",
                data.len(),
                geometry.nx,
                geometry.ny
            )));
        }
        Ok(Self { geometry, data, meta })
    }

    pub fn f32(geometry: &RasterGeometry, values: &[f64], meta: RasterMeta) -> Result<Self> {
        Self::new(*geometry, RasterData::F32(values.iter().map(|&v| v as f32).collect()), meta)
    }

    pub fn u8(geometry: &RasterGeometry, values: Vec<u8>, meta: RasterMeta) -> Result<Self> {
        Self::new(*geometry, RasterData::U8(values), meta)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.geometry;
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * self.data.dtype().size());
        out.extend_from_slice(RASTER_MAGIC);
        out.push(self.data.dtype().code());
        out.push(0);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(g.nx as u32).to_le_bytes());
        out.extend_from_slice(&(g.ny as u32).to_le_bytes());
        out.extend_from_slice(&g.cell_size.to_le_bytes());
        out.extend_from_slice(&g.origin.0.to_le_bytes());
        out.extend_from_slice(&g.origin.1.to_le_bytes());
        match &self.data {
            RasterData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            RasterData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    /// Parses the binary part; `path` only labels errors. Metadata is left
    /// empty.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::format(path, msg);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != RASTER_MAGIC {
            return Err(bad(format!("bad magic {:?}", &bytes[..4])));
        }
        let dtype = match bytes[4] {
            0 => RasterDtype::F32,
            1 => RasterDtype::U8,
            d => return Err(bad(format!("unknown dtype code {d}"))),
        };
        if bytes[5] != 0 {
            return Err(bad("only little-endian payloads are supported".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let (nx, ny) = (u32_at(8), u32_at(12));
        let geometry = RasterGeometry::new(nx, ny, f64_at(16), (f64_at(24), f64_at(32)))
            .map_err(|e| bad(format!("invalid header: {e}")))?;
        let payload = &bytes[HEADER_LEN..];
        let expected = nx * ny * dtype.size();
        if payload.len() != expected {
            return Err(bad(format!("payload is {} bytes, header implies {expected}", payload.len())));
        }
        let data = match dtype {
            RasterDtype::F32 => RasterData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            ),
            RasterDtype::U8 => RasterData::U8(payload.to_vec()),
        };
        Ok(Self {
            geometry,
            data,
            meta: RasterMeta::default(),
        })
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the raster and its sidecar.
pub fn save_raster(path: &Path, raster: &RasterFile) -> Result<()> {
    super::write_file(path, &raster.to_bytes())?;
    let meta = serde_json::to_vec_pretty(&raster.meta).expect("metadata serialises");
    super::write_file(&sidecar_path(path), &meta)
}

/// Reads a raster; a missing sidecar leaves the metadata empty.
pub fn load_raster(path: &Path) -> Result<RasterFile> {
    let bytes = super::read_file(path)?;
    let mut raster = RasterFile::from_bytes(&bytes, path)?;
    let side = sidecar_path(path);
    if side.exists() {
        let text = super::read_file(&side)?;
        raster.meta = serde_json::from_slice(&text).map_err(|e| Error::format(&side, e.to_string()))?;
    }
    Ok(raster)
}

/// Quantises a [0, 1] image to 8-bit grey: `round(255 v)` after clamping.
pub fn quantize_u8(values: &[f64]) -> Vec<u8> {
    values.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

/// Writes an 8-bit greyscale PNG with the top image row first (row 0 of the
/// raster is at the bottom).
pub fn export_png(path: &Path, geometry: &RasterGeometry, grey: &[u8]) -> Result<()> {
    if grey.len() != geometry.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for a {}x{} image",
            grey.len(),
            geometry.nx,
            geometry.ny
        )));
    }
    let mut flipped = Vec::with_capacity(grey.len());
    for row in (0..geometry.ny).rev() {
        flipped.extend_from_slice(&grey[row * geometry.nx..(row + 1) * geometry.nx]);
    }
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, geometry.nx as u32, geometry.ny as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::format(path, e.to_string()))?;
        writer
            .write_image_data(&flipped)
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    super::write_file(path, &buf)
}
