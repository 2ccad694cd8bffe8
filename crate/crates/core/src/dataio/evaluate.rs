//! Scores a directory of predicted probability rasters against truth masks.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::raster::{load_raster, RasterData};
use super::write_file;
use crate::error::{Error, Result};
use crate::metrics::{bce_loss, binarize, confusion, roc_curve, threshold_at_pfa, MaskPair, RocCurve};

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub n_images: usize,
    pub n_pixels: usize,
    pub positives: usize,
    pub target_pfa: f64,
    /// Operating point: lowest threshold with P_FA at or below the target.
    pub threshold: f64,
    pub p_fa: f64,
    pub p_d: f64,
    pub f1: f64,
    pub iou: f64,
    pub bce: f64,
    pub auc: f64,
    #[serde(skip)]
    pub roc: RocCurve,
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "images      {}", self.n_images)?;
        writeln!(f, "pixels      {} ({} positive)", self.n_pixels, self.positives)?;
        writeln!(f, "target_pfa  {:e}", self.target_pfa)?;
        writeln!(f, "threshold   {:.6}", self.threshold)?;
        writeln!(f, "p_fa        {:.6}", self.p_fa)?;
        writeln!(f, "p_d         {:.6}", self.p_d)?;
        writeln!(f, "f1          {:.6}", self.f1)?;
        writeln!(f, "iou         {:.6}", self.iou)?;
        writeln!(f, "bce         {:.6}", self.bce)?;
        write!(f, "auc         {:.6}", self.auc)
    }
}

fn is_raster(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "lsr")
}

fn list_rasters(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && is_raster(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn probabilities(path: &Path) -> Result<Vec<f64>> {
    let r = load_raster(path)?;
    match r.data {
        RasterData::F32(_) => Ok(r.data.to_f64()),
        RasterData::U8(ref v) if v.iter().all(|&x| x <= 1) => Ok(r.data.to_f64()),
        RasterData::U8(_) => Err(Error::format(path, "u8 predictions must be 0/1 masks")),
    }
}

/// Pools every truth mask in `truth_dir` (optionally restricted to the
/// file stems in `ids`) with the same-named prediction in `pred_dir`.
pub fn evaluate_dirs(pred_dir: &Path, truth_dir: &Path, ids: Option<&[String]>, target_pfa: f64) -> Result<EvaluationReport> {
    let mut pairs = Vec::new();
    for tpath in list_rasters(truth_dir)? {
        let stem = tpath.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if ids.is_some_and(|ids| !ids.contains(&stem)) {
            continue;
        }
        let t = load_raster(&tpath)?;
        let RasterData::U8(mask) = t.data else {
            return Err(Error::format(&tpath, "truth masks must be u8"));
        };
        let ppath = pred_dir.join(tpath.file_name().expect("listed file"));
        let pred = load_raster(&ppath)?;
        if !pred.geometry.same_as(&t.geometry) {
            return Err(Error::ShapeMismatch(format!(
                "{} and {} differ in geometry",
                ppath.display(),
                tpath.display()
            )));
        }
        pairs.push(MaskPair::new(t.geometry.nx, t.geometry.ny, probabilities(&ppath)?, mask)?);
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(format!("no truth rasters selected in {}", truth_dir.display())));
    }
    let roc = roc_curve(&pairs)?;
    let op = threshold_at_pfa(&roc, target_pfa)?;
    let hard: Vec<Vec<u8>> = pairs.iter().map(|p| binarize(&p.prob, op.threshold)).collect();
    let truth: Vec<&[u8]> = pairs.iter().map(|p| p.truth.as_slice()).collect();
    let c = confusion(&hard, &truth)?;
    Ok(EvaluationReport {
        n_images: pairs.len(),
        n_pixels: pairs.iter().map(|p| p.prob.len()).sum(),
        positives: roc.positives as usize,
        target_pfa,
        threshold: op.threshold,
        p_fa: op.p_fa,
        p_d: op.p_d,
        f1: c.f1(),
        iou: c.iou(),
        bce: bce_loss(&pairs)?,
        auc: roc.auc(),
        roc,
    })
}

/// Writes the ROC as CSV with columns `threshold,p_fa,p_d`.
pub fn write_roc_table(path: &Path, roc: &RocCurve) -> Result<()> {
    let mut s = String::from("threshold,p_fa,p_d\n");
    for p in &roc.points {
        s.push_str(&format!("{},{},{}\n", p.threshold, p.p_fa, p.p_d));
    }
    write_file(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{save_raster, RasterFile, RasterMeta};
    use crate::grid::RasterGeometry;

    fn write(dir: &Path, name: &str, r: RasterFile) {
        save_raster(&dir.join(name), &r).unwrap();
    }

    #[test]
    fn pools_images_and_matches_metrics() {
        let tmp = tempfile::tempdir().unwrap();
        let (pd, td) = (tmp.path().join("pred"), tmp.path().join("truth"));
        let g = RasterGeometry::new(3, 2, 1e-3, (0.0, 0.0)).unwrap();
        let m = RasterMeta::default();
        write(&pd, "a.lsr", RasterFile::f32(&g, &[0.9, 0.8, 0.7, 0.4, 0.3, 0.1], m.clone()).unwrap());
        write(&td, "a.lsr", RasterFile::u8(&g, vec![1, 1, 0, 1, 0, 0], m.clone()).unwrap());
        write(&pd, "b.lsr", RasterFile::f32(&g, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.5], m.clone()).unwrap());
        write(&td, "b.lsr", RasterFile::u8(&g, vec![0, 0, 0, 0, 0, 1], m.clone()).unwrap());
        let r = evaluate_dirs(&pd, &td, None, 0.2).unwrap();
        assert_eq!((r.n_images, r.n_pixels, r.positives), (2, 12, 4));
        // Eight negatives, so one false alarm (0.7) fits under 0.2 and every
        // positive scores at least 0.4.
        assert_eq!(r.threshold, 0.4f32 as f64);
        assert_eq!((r.p_d, r.p_fa), (1.0, 0.125));
        assert_eq!((r.f1, r.iou), (8.0 / 9.0, 0.8));
        let only_b = evaluate_dirs(&pd, &td, Some(&["b".to_string()]), 0.2).unwrap();
        assert_eq!((only_b.n_images, only_b.p_d), (1, 1.0));
        assert!(only_b.to_string().contains("p_d         1.000000"));

        let csv = tmp.path().join("roc.csv");
        write_roc_table(&csv, &r.roc).unwrap();
        let text = std::fs::read_to_string(csv).unwrap();
        assert!(text.starts_with("threshold,p_fa,p_d\n"));
        assert_eq!(text.lines().count(), r.roc.points.len() + 1);
    }

    #[test]
    fn missing_prediction_and_bad_inputs() {
        let tmp = tempfile::tempdir().unwrap();
        let (pd, td) = (tmp.path().join("pred"), tmp.path().join("truth"));
        let g = RasterGeometry::new(2, 2, 1e-3, (0.0, 0.0)).unwrap();
        let m = RasterMeta::default();
        write(&td, "a.lsr", RasterFile::u8(&g, vec![1, 0, 0, 0], m.clone()).unwrap());
        std::fs::create_dir_all(&pd).unwrap();
        assert!(matches!(evaluate_dirs(&pd, &td, None, 0.1), Err(Error::Io { .. })));
        write(&pd, "a.lsr", RasterFile::f32(&g, &[1.5, 0.0, 0.0, 0.0], m.clone()).unwrap());
        assert!(evaluate_dirs(&pd, &td, None, 0.1).is_err());
        write(&pd, "a.lsr", RasterFile::u8(&g, vec![1, 0, 0, 0], m.clone()).unwrap());
        assert!(evaluate_dirs(&pd, &td, None, 0.1).is_ok());
        assert!(matches!(evaluate_dirs(&pd, &td, None, 1.0), Err(Error::InvalidArgument(_))));
        assert!(evaluate_dirs(&pd, &td, Some(&[]), 0.1).is_err());
    }
}
