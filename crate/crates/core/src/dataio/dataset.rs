//! Dataset generation with content-hash resume.
//!
//! Layout under the output root:
//!
//! ```text
//! manifest.json
//! calibration/   free_space.lss, pec_<k>.lss, calibration.json
//! scenes/<id>.toml
//! sinograms/<id>.lss            free-space and time-axis calibrated
//! contours/<id>.json, <id>_noisy.json
//! vmaps/<id>.lsr, <id>_noisy.lsr
//! images/<method>/<id>.lsr      raw signed backprojection
//! detect/<method>/<id>.lsr      threshold-detector probabilities
//! truth/<id>.lsr                fluid mask, u8
//! samples/<id>.json             per-sample record
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::raster::{load_raster, save_raster, RasterFile, RasterMeta};
use super::scene::{save_contour, SceneFile, SimSettings};
use super::sinogram::{load_sinogram, save_sinogram};
use super::{read_file, sha256_file, sha256_hex, write_file};
use crate::backproject::{backproject_cgli, backproject_tof, normalize_minmax, BpImage};
use crate::eikonal::solve_all_elements;
use crate::error::{Error, Result};
use crate::forward::{
    apply_time_offset, freespace_calibrate, pec_cylinder_scene, simulate_scan, time_axis_calibrate, Sinogram,
};
use crate::grid::RasterGeometry;
use crate::metrics::threshold_detector;
use crate::phantom::{
    base_phantom, build_phantom, contour_noise_sigma, extract_contour, perturb_contour, rasterize_velocity_map,
    Contour, PhantomSpec, PropertyTable, TissueLabel, TissueMap, VelocityMap,
};

pub const CALIBRATION_DIR: &str = "calibration";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub samples: usize,
    pub base_phantoms: Vec<u32>,
    /// Fluid radii cycled over samples, m. Radii that do not fit a phantom's
    /// fat layer are reduced to its largest admissible radius.
    pub fluid_radii: Vec<f64>,
    /// Train, validation and test proportions.
    pub split: [f64; 3],
    pub tof_eps: Vec<f64>,
    pub cgli_eps: f64,
    pub contour_vertices: usize,
    /// Worst-case contour error for the noisy CGLI variant, m.
    pub contour_noise: f64,
    pub pec_radii: Vec<f64>,
    /// Quantile for the detector's hard masks.
    pub detector_quantile: f64,
    pub sim: SimSettings,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 40,
            base_phantoms: (0..10).collect(),
            fluid_radii: vec![2.5e-3, 3.5e-3, 4.5e-3, 6.0e-3],
            split: [0.8, 0.1, 0.1],
            tof_eps: vec![1.0, 2.5],
            cgli_eps: 5.0,
            contour_vertices: 128,
            contour_noise: 1e-3,
            pec_radii: vec![0.01, 0.02],
            detector_quantile: 0.99,
            sim: SimSettings::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if self.base_phantoms.is_empty() || self.base_phantoms.iter().any(|&b| b > 9) {
            return bad("base_phantoms must be a non-empty list of ids in 0..=9".into());
        }
        if self.fluid_radii.is_empty() || self.fluid_radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return bad("fluid_radii must be a non-empty list of positive radii".into());
        }
        if self.split.iter().any(|&p| !(p >= 0.0 && p.is_finite())) || self.split.iter().sum::<f64>() <= 0.0 {
            return bad("split proportions must be non-negative with a positive sum".into());
        }
        if self.tof_eps.iter().any(|&e| !(e >= 1.0)) || !(self.cgli_eps >= 1.0) {
            return bad("effective permittivities must be >= 1".into());
        }
        if !(self.contour_noise > 0.0) {
            return bad("contour_noise must be positive".into());
        }
        if self.pec_radii.len() < 2 {
            return bad("time-axis calibration needs at least two PEC radii".into());
        }
        if !(0.0..1.0).contains(&self.detector_quantile) {
            return bad("detector_quantile must lie in [0, 1)".into());
        }
        self.sim.sim_config()?;
        self.sim.waveform()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

/// Image method names in output order: `tof<eps>` for each ToF
/// permittivity, then `cgli` and `cgli_noisy`.
pub fn image_methods(cfg: &DatasetConfig) -> Vec<String> {
    let mut m: Vec<String> = cfg.tof_eps.iter().map(|e| format!("tof{e:.1}")).collect();
    m.push("cgli".into());
    m.push("cgli_noisy".into());
    m
}

/// Per-sample seed derived from the dataset seed and sample index. Kept to
/// 63 bits so it fits a TOML integer.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(&(index as u64).to_le_bytes());
    let h = sha256_hex(&bytes);
    u64::from_str_radix(&h[..16], 16).expect("hex digest") >> 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown split {s:?}")))
    }
}

/// Assigns whole base phantoms to splits. Counts follow the proportions by
/// largest remainder; every split with a positive share gets at least one
/// phantom when there are enough to go round.
pub fn split_by_phantom(ids: &[u32], proportions: [f64; 3], seed: u64) -> BTreeMap<u32, Split> {
    let mut unique: Vec<u32> = ids.to_vec();
    unique.sort_unstable();
    unique.dedup();
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = unique.len();
    let total: f64 = proportions.iter().sum();
    let exact: Vec<f64> = proportions.iter().map(|p| p / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let mut left = n - counts.iter().sum::<usize>();
    for &k in &order {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    for k in 0..3 {
        if proportions[k] > 0.0 && counts[k] == 0 {
            let donor = (0..3).max_by_key(|&j| counts[j]).expect("three splits");
            if counts[donor] > 1 {
                counts[donor] -= 1;
                counts[k] += 1;
            }
        }
    }
    let mut out = BTreeMap::new();
    let mut it = unique.into_iter();
    for (k, split) in Split::ALL.into_iter().enumerate() {
        for id in it.by_ref().take(counts[k]) {
            out.insert(id, split);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    /// Relative to the dataset root, `/`-separated.
    pub path: String,
    pub sha256: String,
}

impl FileRef {
    fn record(root: &Path, rel: &str) -> Result<Self> {
        Ok(Self {
            path: rel.to_string(),
            sha256: sha256_file(&root.join(rel))?,
        })
    }

    fn intact(&self, root: &Path) -> bool {
        sha256_file(&root.join(&self.path)).is_ok_and(|h| h == self.sha256)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub base_id: u32,
    pub fluid_radius: f64,
    pub split: Split,
    /// Hash of the scene file, simulation settings and processing settings.
    pub key: String,
    /// `scene`, `sinogram`, `contour`, `contour_noisy`, `vmap`, `vmap_noisy`,
    /// `truth`, `image/<method>` and `detect/<method>`.
    pub files: BTreeMap<String, FileRef>,
}

impl SampleRecord {
    pub fn file(&self, key: &str) -> Result<&FileRef> {
        self.files
            .get(key)
            .ok_or_else(|| Error::InvalidArgument(format!("sample {} has no {key} file", self.id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: DatasetConfig,
    /// Fitted trace time offset removed from every sinogram, s.
    pub time_offset: f64,
    pub calibration: Vec<FileRef>,
    pub calibration_simulations: usize,
    /// One per element per sample.
    pub simulations: usize,
    pub samples: Vec<SampleRecord>,
    /// Samples that failed, with the error text.
    pub failed: Vec<(String, String)>,
}

impl Manifest {
    pub fn path(root: &Path) -> PathBuf {
        root.join("manifest.json")
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_slice(&read_file(path)?).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &serde_json::to_vec_pretty(self).expect("manifest serialises"))
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn sample(&self, id: &str) -> Result<&SampleRecord> {
        self.samples
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("no sample {id:?} in manifest")))
    }

    /// Every referenced file exists under `root` and matches its hash.
    pub fn verify(&self, root: &Path) -> Result<()> {
        let refs = self.calibration.iter().chain(self.samples.iter().flat_map(|s| s.files.values()));
        for f in refs {
            if !f.intact(root) {
                return Err(Error::format(root.join(&f.path), "missing or hash mismatch"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    pub manifest: Manifest,
    /// Element simulations run by this call, calibration included.
    pub new_simulations: usize,
}

struct Context<'a> {
    root: &'a Path,
    cfg: &'a DatasetConfig,
    sim_grid: RasterGeometry,
    image_grid: RasterGeometry,
    props: PropertyTable,
    free: Sinogram,
    time_offset: f64,
    calibration_key: String,
}

#[derive(Serialize, Deserialize)]
struct CalibrationRecord {
    key: String,
    time_offset: f64,
    files: Vec<FileRef>,
}

fn calibration_key(cfg: &DatasetConfig) -> String {
    let body = serde_json::json!({ "sim": cfg.sim, "pec_radii": cfg.pec_radii });
    sha256_hex(body.to_string().as_bytes())
}

fn calibrate(root: &Path, cfg: &DatasetConfig, sim_grid: &RasterGeometry) -> Result<(Sinogram, f64, Vec<FileRef>, usize)> {
    let key = calibration_key(cfg);
    let record_path = root.join(CALIBRATION_DIR).join("calibration.json");
    if let Ok(bytes) = read_file(&record_path) {
        if let Ok(rec) = serde_json::from_slice::<CalibrationRecord>(&bytes) {
            if rec.key == key && rec.files.iter().all(|f| f.intact(root)) {
                let free = load_sinogram(&root.join(&rec.files[0].path))?;
                log::info!("reusing calibration scans");
                return Ok((free, rec.time_offset, rec.files, 0));
            }
        }
    }
    let sim = cfg.sim.sim_config()?;
    let array = cfg.sim.array();
    let waveform = cfg.sim.waveform()?;
    let props = PropertyTable::default();
    log::info!("simulating free-space scan");
    let free = simulate_scan(&TissueMap::empty(sim_grid, &props), &array, &waveform, &sim, "free_space")?;
    let mut files = Vec::new();
    let rel = format!("{CALIBRATION_DIR}/free_space.lss");
    save_sinogram(&root.join(&rel), &free)?;
    files.push(FileRef::record(root, &rel)?);

    // Centred cylinders look the same from every element, so one suffices.
    let single = array.with_elements(1);
    let free_single = Sinogram::new(vec![free.traces[0].clone()], single, "free_space".into(), false)?;
    let mut pec = Vec::new();
    for (k, &a) in cfg.pec_radii.iter().enumerate() {
        log::info!("simulating PEC cylinder a = {a} m");
        let scene = pec_cylinder_scene(sim_grid, array.center, a);
        let raw = simulate_scan(&scene, &single, &waveform, &sim, &format!("pec_{k}"))?;
        let cal = freespace_calibrate(&raw, &free_single)?;
        let rel = format!("{CALIBRATION_DIR}/pec_{k}.lss");
        save_sinogram(&root.join(&rel), &cal)?;
        files.push(FileRef::record(root, &rel)?);
        pec.push((cal, a));
    }
    let time_offset = time_axis_calibrate(&pec)?;
    log::info!("time-axis offset {time_offset:e} s");
    let rec = CalibrationRecord {
        key,
        time_offset,
        files: files.clone(),
    };
    write_file(&record_path, &serde_json::to_vec_pretty(&rec).expect("record serialises"))?;
    Ok((free, time_offset, files, array.elements + cfg.pec_radii.len()))
}

struct Plan {
    index: usize,
    id: String,
    spec: PhantomSpec,
}

fn plan_samples(cfg: &DatasetConfig) -> Result<Vec<Plan>> {
    (0..cfg.samples)
        .map(|index| {
            let nb = cfg.base_phantoms.len();
            let base_id = cfg.base_phantoms[index % nb];
            let radius = cfg.fluid_radii[(index / nb) % cfg.fluid_radii.len()];
            let base = PhantomSpec {
                rng_seed: sample_seed(cfg.seed, index),
                ..base_phantom(base_id)?
            };
            let spec = base.with_fluid(radius.min(base.max_fluid_radius()))?;
            Ok(Plan {
                index,
                id: format!("s{index:04}"),
                spec,
            })
        })
        .collect()
}

fn image_meta(id: &str, stage: &str, params: &[(&str, serde_json::Value)]) -> RasterMeta {
    RasterMeta {
        scene_id: id.to_string(),
        stage: stage.to_string(),
        params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    }
}

/// Velocity map as stored on disk, f32 speeds with `eps_e` in the metadata.
pub fn vmap_raster(v: &VelocityMap, scene_id: &str) -> Result<RasterFile> {
    RasterFile::f32(
        &v.geometry,
        &v.speed,
        image_meta(scene_id, "vmap", &[("eps_e", serde_json::json!(v.eps_e))]),
    )
}

pub fn vmap_from_raster(r: &RasterFile) -> Result<VelocityMap> {
    let mut v = VelocityMap::from_speeds(&r.geometry, r.data.to_f64())?;
    v.eps_e = r.meta.params.get("eps_e").and_then(|x| x.as_f64()).unwrap_or(1.0);
    Ok(v)
}

impl Context<'_> {
    fn sample_key(&self, scene_toml: &str) -> String {
        let c = self.cfg;
        let body = serde_json::json!({
            "scene": scene_toml,
            "calibration": self.calibration_key,
            "tof_eps": c.tof_eps,
            "cgli_eps": c.cgli_eps,
            "contour_vertices": c.contour_vertices,
            "contour_noise": c.contour_noise,
            "detector_quantile": c.detector_quantile,
        });
        sha256_hex(body.to_string().as_bytes())
    }

    fn reuse(&self, plan: &Plan, key: &str) -> Option<SampleRecord> {
        let bytes = read_file(&self.root.join(format!("samples/{}.json", plan.id))).ok()?;
        let rec: SampleRecord = serde_json::from_slice(&bytes).ok()?;
        (rec.key == key && rec.files.values().all(|f| f.intact(self.root))).then_some(rec)
    }

    fn save_image(&self, rel: &str, img: &BpImage, meta: RasterMeta) -> Result<()> {
        save_raster(&self.root.join(rel), &RasterFile::f32(&img.geometry, &img.pixels, meta)?)
    }

    fn cgli(&self, id: &str, contour: &Contour, sino: &Sinogram, rel_vmap: &str) -> Result<BpImage> {
        let v = rasterize_velocity_map(contour, self.cfg.cgli_eps, &self.image_grid)?;
        let stored = vmap_raster(&v, id)?;
        save_raster(&self.root.join(rel_vmap), &stored)?;
        let v = vmap_from_raster(&stored)?;
        let maps = solve_all_elements(&v, &sino.geometry)?;
        backproject_cgli(sino, &maps, &self.image_grid)
    }

    /// Returns the record and the number of element simulations run.
    fn process(&self, plan: &Plan, split: Split) -> Result<(SampleRecord, usize)> {
        let cfg = self.cfg;
        let id = &plan.id;
        let scene_file = SceneFile {
            id: id.clone(),
            sim: cfg.sim,
            phantom: plan.spec.clone(),
        };
        let scene_toml = scene_file.to_toml();
        let key = self.sample_key(&scene_toml);
        if let Some(mut rec) = self.reuse(plan, &key) {
            rec.split = split;
            return Ok((rec, 0));
        }
        log::info!("sample {id}: base {} fluid {:.2} mm", plan.spec.base_id, plan.spec.fluid_radius * 1e3);
        let mut rels: Vec<(String, String)> = Vec::new();
        let mut put = |name: &str, rel: String| rels.push((name.to_string(), rel));

        let rel = format!("scenes/{id}.toml");
        write_file(&self.root.join(&rel), scene_toml.as_bytes())?;
        put("scene", rel);

        let scene = build_phantom(&plan.spec, &self.sim_grid, &self.props)?;
        let array = cfg.sim.array();
        let raw = simulate_scan(&scene, &array, &cfg.sim.waveform()?, &cfg.sim.sim_config()?, id)?;
        let sino = apply_time_offset(&freespace_calibrate(&raw, &self.free)?, self.time_offset);
        let rel = format!("sinograms/{id}.lss");
        save_sinogram(&self.root.join(&rel), &sino)?;
        put("sinogram", rel);

        let fine = build_phantom(&plan.spec, &self.image_grid, &self.props)?;
        let contour = extract_contour(&fine, cfg.contour_vertices)?;
        let noisy = perturb_contour(
            &contour,
            contour_noise_sigma(cfg.contour_noise),
            cfg.contour_noise,
            plan.spec.rng_seed ^ 0x6e6f_6973_79,
        )?;
        for (name, c) in [("contour", &contour), ("contour_noisy", &noisy)] {
            let rel = format!("contours/{id}{}.json", if name == "contour" { "" } else { "_noisy" });
            save_contour(&self.root.join(&rel), c)?;
            put(name, rel);
        }

        let mut images: Vec<(String, BpImage, &Contour)> = Vec::new();
        for &eps in &cfg.tof_eps {
            let img = backproject_tof(&sino, &array, eps, &self.image_grid)?;
            images.push((format!("tof{eps:.1}"), img, &contour));
        }
        let rel = format!("vmaps/{id}.lsr");
        images.push(("cgli".into(), self.cgli(id, &contour, &sino, &rel)?, &contour));
        put("vmap", rel);
        let rel = format!("vmaps/{id}_noisy.lsr");
        images.push(("cgli_noisy".into(), self.cgli(id, &noisy, &sino, &rel)?, &noisy));
        put("vmap_noisy", rel);

        for (method, img, c) in &images {
            let rel = format!("images/{method}/{id}.lsr");
            self.save_image(&rel, img, image_meta(id, "image", &[("method", serde_json::json!(method))]))?;
            put(&format!("image/{method}"), rel);
            let det = threshold_detector(&normalize_minmax(img), c, cfg.detector_quantile)?;
            let rel = format!("detect/{method}/{id}.lsr");
            let meta = image_meta(id, "detect", &[("method", serde_json::json!(method))]);
            save_raster(&self.root.join(&rel), &RasterFile::f32(&self.image_grid, &det.prob, meta)?)?;
            put(&format!("detect/{method}"), rel);
        }

        let truth = scene.mask_on(&self.image_grid, TissueLabel::Fluid);
        let rel = format!("truth/{id}.lsr");
        save_raster(&self.root.join(&rel), &RasterFile::u8(&self.image_grid, truth, image_meta(id, "truth", &[]))?)?;
        put("truth", rel);

        let files = rels
            .into_iter()
            .map(|(name, rel)| Ok((name, FileRef::record(self.root, &rel)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let rec = SampleRecord {
            id: id.clone(),
            base_id: plan.spec.base_id,
            fluid_radius: plan.spec.fluid_radius,
            split,
            key,
            files,
        };
        write_file(
            &self.root.join(format!("samples/{id}.json")),
            &serde_json::to_vec_pretty(&rec).expect("record serialises"),
        )?;
        Ok((rec, array.elements))
    }
}

/// Builds, simulates, calibrates and images every sample of `cfg` under
/// `root`, then writes `manifest.json`. Completed samples whose files still
/// hash-match are reused. A failing sample is logged and left out.
pub fn generate_dataset(cfg: &DatasetConfig, root: &Path) -> Result<GenerateOutcome> {
    cfg.validate()?;
    let sim = cfg.sim.sim_config()?;
    let sim_grid = RasterGeometry::scene_with_cell(sim.cell_size)?;
    cfg.sim.array().validate(&sim_grid, sim.cell_size)?;
    let plans = plan_samples(cfg)?;
    let splits = split_by_phantom(&cfg.base_phantoms, cfg.split, cfg.seed);

    let (free, time_offset, calibration, cal_sims) = calibrate(root, cfg, &sim_grid)?;
    let ctx = Context {
        root,
        cfg,
        sim_grid,
        image_grid: RasterGeometry::image(),
        props: PropertyTable::default(),
        free,
        time_offset,
        calibration_key: calibration_key(cfg),
    };
    let results: Vec<Result<(SampleRecord, usize)>> = plans
        .par_iter()
        .map(|p| ctx.process(p, splits[&p.spec.base_id]))
        .collect();

    let mut samples = Vec::new();
    let mut failed = Vec::new();
    let mut new_simulations = cal_sims;
    for (plan, res) in plans.iter().zip(results) {
        match res {
            Ok((rec, sims)) => {
                new_simulations += sims;
                samples.push(rec);
            }
            Err(e) => {
                log::warn!("sample {} (index {}) failed: {e}", plan.id, plan.index);
                failed.push((plan.id.clone(), e.to_string()));
            }
        }
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        config: cfg.clone(),
        time_offset,
        calibration,
        calibration_simulations: cfg.sim.elements + cfg.pec_radii.len(),
        simulations: samples.len() * cfg.sim.elements,
        samples,
        failed,
    };
    manifest.save(&Manifest::path(root))?;
    Ok(GenerateOutcome {
        manifest,
        new_simulations,
    })
}

/// Loads a stored raw image as a [`BpImage`].
pub fn load_image(path: &Path) -> Result<BpImage> {
    let r = load_raster(path)?;
    Ok(BpImage {
        geometry: r.geometry,
        pixels: r.data.to_f64(),
        normalization: crate::backproject::Normalization::Raw,
    })
}
