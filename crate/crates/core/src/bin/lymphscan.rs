use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lymphscan::backproject::{backproject_cgli, backproject_tof, normalize_minmax, BpImage};
use lymphscan::dataio::{
    evaluate_dirs, export_png, generate_dataset, load_raster, load_scene, load_sinogram, quantize_u8, save_raster,
    save_sinogram, vmap_from_raster, write_roc_table, DatasetConfig, Manifest, RasterData, RasterFile, RasterMeta,
    SampleRecord, Split,
};
use lymphscan::eikonal::{solve_all_elements, solve_travel_time};
use lymphscan::forward::{apply_time_offset, freespace_calibrate, simulate_scan};
use lymphscan::phantom::{build_phantom, PropertyTable, TissueMap};
use lymphscan::{Error, RasterGeometry, Result};

const THREADS_ENV: &str = "LYMPHSCAN_THREADS";

/// Microwave limb imaging pipeline.
#[derive(Parser)]
#[command(name = "lymphscan", version, about)]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, simulate and image a dataset; resumes completed samples.
    Generate(GenerateArgs),
    /// Simulate a scan of one scene file.
    Simulate(SimulateArgs),
    /// Solve first-arrival travel times on a velocity map.
    Traveltime(TraveltimeArgs),
    /// Backproject a sinogram.
    Image(ImageArgs),
    /// Score probability rasters against truth masks.
    Evaluate(EvaluateArgs),
    /// Write a raster as an 8-bit grayscale PNG.
    ExportPng(ExportPngArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Dataset config (TOML). Library defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// FDTD cell size, m.
    #[arg(long)]
    cell_size: Option<f64>,
    #[arg(long)]
    elements: Option<usize>,
    #[arg(long)]
    cgli_eps: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene file (TOML).
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Simulate the empty domain with the scene's settings.
    #[arg(long)]
    freespace: bool,
    /// Free-space sinogram to subtract.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Time offset removed from every trace after calibration, s.
    #[arg(long, allow_hyphen_values = true, requires = "reference")]
    time_offset: Option<f64>,
    /// Overrides the phantom's placement seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TraveltimeArgs {
    /// Velocity map raster.
    #[arg(long)]
    vmap: PathBuf,
    /// Source position `x,y` in metres.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    source: (f64, f64),
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Tof,
    Cgli,
}

#[derive(Args)]
struct ImageArgs {
    #[arg(long)]
    sino: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Effective permittivity for ToF.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    /// Velocity map for CGLI.
    #[arg(long, required_if_eq("method", "cgli"))]
    vmap: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Min/max scale the image to [0, 1].
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    truth_dir: PathBuf,
    /// Target false-alarm rate for the operating point.
    #[arg(long, default_value_t = 1e-3)]
    pfa: f64,
    /// Restrict to one split of this manifest.
    #[arg(long, requires = "split")]
    manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest", value_parser = ["train", "validation", "test"])]
    split: Option<String>,
    /// ROC table output (CSV).
    #[arg(long, default_value = "roc.csv")]
    roc: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExportPngArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Quantise values as they are instead of min/max scaling first.
    #[arg(long)]
    no_normalize: bool,
}

fn parse_point(s: &str) -> std::result::Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(x)?, p(y)?))
}

fn meta(scene_id: &str, stage: &str, params: serde_json::Value) -> RasterMeta {
    let params = match params {
        serde_json::Value::Object(m) => m.into_iter().collect(),
        _ => Default::default(),
    };
    RasterMeta {
        scene_id: scene_id.to_string(),
        stage: stage.to_string(),
        params,
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            DatasetConfig::from_toml(&text)?
        }
        None => DatasetConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(v) = a.cell_size {
        cfg.sim.cell_size = v;
    }
    if let Some(v) = a.elements {
        cfg.sim.elements = v;
    }
    if let Some(v) = a.cgli_eps {
        cfg.cgli_eps = v;
    }
    let out = generate_dataset(&cfg, &a.out)?;
    let m = &out.manifest;
    let count = |s: Split| m.in_split(s).count();
    println!(
        "samples {} (train {}, validation {}, test {}), failed {}",
        m.samples.len(),
        count(Split::Train),
        count(Split::Validation),
        count(Split::Test),
        m.failed.len()
    );
    println!("simulations {} recorded, {} run now", m.simulations, out.new_simulations);
    println!("manifest {}", Manifest::path(&a.out).display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut scene = load_scene(&a.scene)?;
    if let Some(s) = a.seed {
        scene.phantom.rng_seed = s;
    }
    let cfg = scene.sim.sim_config()?;
    let grid = RasterGeometry::scene_with_cell(cfg.cell_size)?;
    let props = PropertyTable::default();
    let (map, id) = if a.freespace {
        (TissueMap::empty(&grid, &props), "free_space".to_string())
    } else {
        (build_phantom(&scene.phantom, &grid, &props)?, scene.id.clone())
    };
    let mut sino = simulate_scan(&map, &scene.sim.array(), &scene.sim.waveform()?, &cfg, &id)?;
    if let Some(r) = &a.reference {
        sino = freespace_calibrate(&sino, &load_sinogram(r)?)?;
    }
    if let Some(t0) = a.time_offset {
        sino = apply_time_offset(&sino, t0);
    }
    save_sinogram(&a.out, &sino)
}

fn traveltime(a: TraveltimeArgs) -> Result<()> {
    let raster = load_raster(&a.vmap)?;
    let tt = solve_travel_time(&vmap_from_raster(&raster)?, a.source)?;
    let m = meta(
        &raster.meta.scene_id,
        "traveltime",
        serde_json::json!({ "source": [a.source.0, a.source.1] }),
    );
    save_raster(&a.out, &RasterFile::f32(&tt.geometry, &tt.tau, m)?)
}

fn image(a: ImageArgs) -> Result<()> {
    let sino = load_sinogram(&a.sino)?;
    let grid = RasterGeometry::image();
    let (img, params) = match a.method {
        Method::Tof => (
            backproject_tof(&sino, &sino.geometry, a.eps, &grid)?,
            serde_json::json!({ "method": "tof", "eps_e": a.eps }),
        ),
        Method::Cgli => {
            let path = a.vmap.as_deref().expect("clap enforces --vmap for cgli");
            let vmap = vmap_from_raster(&load_raster(path)?)?;
            let maps = solve_all_elements(&vmap, &sino.geometry)?;
            (
                backproject_cgli(&sino, &maps, &vmap.geometry)?,
                serde_json::json!({ "method": "cgli", "eps_e": vmap.eps_e }),
            )
        }
    };
    let img = if a.normalize { normalize_minmax(&img) } else { img };
    save_raster(&a.out, &RasterFile::f32(&img.geometry, &img.pixels, meta(&sino.scene_id, "image", params))?)
}

fn split_ids(manifest: &Path, split: &str) -> Result<Vec<String>> {
    let split: Split = split.parse()?;
    let m = Manifest::load(manifest)?;
    Ok(m.in_split(split).map(|s: &SampleRecord| s.id.clone()).collect())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let ids = match (&a.manifest, &a.split) {
        (Some(m), Some(s)) => Some(split_ids(m, s)?),
        _ => None,
    };
    let report = evaluate_dirs(&a.pred_dir, &a.truth_dir, ids.as_deref(), a.pfa)?;
    write_roc_table(&a.roc, &report.roc)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    } else {
        println!("{report}");
        println!("roc_table   {}", a.roc.display());
    }
    Ok(())
}

fn export(a: ExportPngArgs) -> Result<()> {
    let r = load_raster(&a.input)?;
    let grey = match (&r.data, a.no_normalize) {
        (RasterData::U8(v), true) => v.clone(),
        (RasterData::U8(v), false) if v.iter().all(|&x| x <= 1) => v.iter().map(|&x| x * 255).collect(),
        _ if a.no_normalize => quantize_u8(&r.data.to_f64()),
        _ => {
            let img = BpImage {
                geometry: r.geometry,
                pixels: r.data.to_f64(),
                normalization: lymphscan::backproject::Normalization::Raw,
            };
            quantize_u8(&normalize_minmax(&img).pixels)
        }
    };
    export_png(&a.out, &r.geometry, &grey)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Simulate(a) => simulate(a),
        Command::Traveltime(a) => traveltime(a),
        Command::Image(a) => image(a),
        Command::Evaluate(a) => evaluate(a),
        Command::ExportPng(a) => export(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.code() as u8)
        }
    }
}
