//! LSS1 sinograms: magic, u32 header length, a JSON header, then every
//! trace's samples as little-endian f64 in element order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{ArrayGeometry, Sinogram, Trace};

pub const SINOGRAM_MAGIC: &[u8; 4] = b"LSS1";

#[derive(Serialize, Deserialize)]
struct Header {
    geometry: ArrayGeometry,
    scene_id: String,
    calibrated: bool,
    samples: usize,
    dt: f64,
    t0: f64,
}

pub fn sinogram_to_bytes(sino: &Sinogram) -> Vec<u8> {
    let header = Header {
        geometry: sino.geometry,
        scene_id: sino.scene_id.clone(),
        calibrated: sino.calibrated,
        samples: sino.samples_per_trace(),
        dt: sino.dt(),
        t0: sino.t0(),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(8 + json.len() + 8 * header.samples * sino.elements());
    out.extend_from_slice(SINOGRAM_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for trace in &sino.traces {
        trace.samples.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    out
}

pub fn sinogram_from_bytes(bytes: &[u8], path: &Path) -> Result<Sinogram> {
    let bad = |msg: String| Error::format(path, msg);
    if bytes.len() < 8 || &bytes[..4] != SINOGRAM_MAGIC {
        return Err(bad("missing LSS1 magic".into()));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header".into()))?;
    let h: Header = serde_json::from_slice(body).map_err(|e| bad(format!("header: {e}")))?;
    let payload = &bytes[8 + hlen..];
    let expected = h.geometry.elements * h.samples * 8;
    if payload.len() != expected {
        return Err(bad(format!("payload is {} bytes, header implies {expected}", payload.len())));
    }
    let traces = if h.samples == 0 {
        (0..h.geometry.elements)
            .map(|i| Trace {
                samples: vec![],
                dt: h.dt,
                t0: h.t0,
                element_index: i,
            })
            .collect()
    } else {
        payload
            .chunks_exact(8 * h.samples)
            .enumerate()
            .map(|(i, chunk)| Trace {
                samples: chunk
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
                dt: h.dt,
                t0: h.t0,
                element_index: i,
            })
            .collect()
    };
    Sinogram::new(traces, h.geometry, h.scene_id, h.calibrated).map_err(|e| bad(e.to_string()))
}

pub fn save_sinogram(path: &Path, sino: &Sinogram) -> Result<()> {
    super::write_file(path, &sinogram_to_bytes(sino))
}

pub fn load_sinogram(path: &Path) -> Result<Sinogram> {
    sinogram_from_bytes(&super::read_file(path)?, path)
}
