//! C ABI over the lymphscan pipeline.
//!
//! Objects cross the boundary as opaque handles created by `*_load` or
//! `*_from_*` calls and released with the matching `*_free`. Every fallible
//! call returns an [`LsStatus`]; on failure [`ls_last_error_message`] holds a
//! description until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lymphscan::backproject::{backproject_cgli, backproject_tof, normalize_minmax, BpImage};
use lymphscan::dataio::{load_raster, load_sinogram, save_raster, vmap_from_raster, RasterFile, RasterMeta};
use lymphscan::eikonal::{solve_all_elements, solve_travel_time};
use lymphscan::forward::Sinogram;
use lymphscan::metrics::{bce_loss, confusion, roc_curve, threshold_at_pfa, MaskPair};
use lymphscan::phantom::{rasterize_velocity_map, Contour, VelocityMap};
use lymphscan::{Error, RasterGeometry};

/// Status codes. Values from -10 down mirror the library's error categories.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    LsOk = 0,
    LsErrNullPointer = -1,
    LsErrPanic = -2,
    LsErrUtf8 = -3,
    LsErrBufferSize = -4,
    LsErrSpecGeometry = -10,
    LsErrEmptyScene = -11,
    LsErrDegenerateContour = -12,
    LsErrStability = -13,
    LsErrOutOfDomain = -14,
    LsErrShapeMismatch = -15,
    LsErrInsufficientData = -16,
    LsErrFit = -17,
    LsErrSourceOutOfDomain = -18,
    LsErrNonpositiveSpeed = -19,
    LsErrDegenerateLabels = -20,
    LsErrInvalidArgument = -21,
    LsErrFormat = -22,
    LsErrConfig = -23,
    LsErrIo = -24,
}

impl LsStatus {
    fn of(e: &Error) -> Self {
        use LsStatus::*;
        match e.code() {
            10 => LsErrSpecGeometry,
            11 => LsErrEmptyScene,
            12 => LsErrDegenerateContour,
            13 => LsErrStability,
            14 => LsErrOutOfDomain,
            15 => LsErrShapeMismatch,
            16 => LsErrInsufficientData,
            17 => LsErrFit,
            18 => LsErrSourceOutOfDomain,
            19 => LsErrNonpositiveSpeed,
            20 => LsErrDegenerateLabels,
            21 => LsErrInvalidArgument,
            22 => LsErrFormat,
            23 => LsErrConfig,
            _ => LsErrIo,
        }
    }
}

/// Calibrated sinogram.
pub struct LsSinogram {
    inner: Sinogram,
}

/// Velocity map on a raster.
pub struct LsVelocityMap {
    inner: VelocityMap,
}

/// Backprojected image on the 256 x 256 image grid.
pub struct LsImage {
    inner: BpImage,
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Utf8,
    BufferSize { need: usize, got: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsStatus::LsOk,
        Ok(Err(fail)) => {
            let (status, msg) = match fail {
                Failure::Core(e) => (LsStatus::of(&e), format!("{}: {e}", e.category())),
                Failure::Null(what) => (LsStatus::LsErrNullPointer, format!("null pointer: {what}")),
                Failure::Utf8 => (LsStatus::LsErrUtf8, "path is not valid UTF-8".into()),
                Failure::BufferSize { need, got } => (
                    LsStatus::LsErrBufferSize,
                    format!("buffer holds {got} elements, {need} required"),
                ),
            };
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LsStatus::LsErrPanic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8)?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Failure> {
    match (p.is_null(), n) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(Failure::Null(what)),
        (false, _) => Ok(std::slice::from_raw_parts(p, n)),
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_scalar<T>(p: *mut T, v: T) {
    if !p.is_null() {
        *p = v;
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ls_sinogram_load(path: *const c_char, out: *mut *mut LsSinogram) -> LsStatus {
    guard(|| {
        let inner = load_sinogram(&path_arg(path)?)?;
        put(out, LsSinogram { inner })
    })
}

/// # Safety
/// `s` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_sinogram_elements(s: *const LsSinogram) -> usize {
    s.as_ref().map_or(0, |s| s.inner.elements())
}

/// # Safety
/// `s` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_sinogram_samples(s: *const LsSinogram) -> usize {
    s.as_ref().map_or(0, |s| s.inner.samples_per_trace())
}

/// # Safety
/// `s` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_sinogram_free(s: *mut LsSinogram) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Loads an LSR1 velocity map.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ls_vmap_load(path: *const c_char, out: *mut *mut LsVelocityMap) -> LsStatus {
    guard(|| {
        let inner = vmap_from_raster(&load_raster(&path_arg(path)?)?)?;
        put(out, LsVelocityMap { inner })
    })
}

/// Two-valued map on the image grid: `c / sqrt(eps_e)` inside the closed
/// contour given as `n_vertices` interleaved x, y pairs (m), `c` outside.
///
/// # Safety
/// `xy` holds `2 * n_vertices` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ls_vmap_from_contour(
    xy: *const f64,
    n_vertices: usize,
    eps_e: f64,
    out: *mut *mut LsVelocityMap,
) -> LsStatus {
    guard(|| {
        let flat = slice_arg(xy, 2 * n_vertices, "xy")?;
        let contour = Contour::new(flat.chunks_exact(2).map(|p| (p[0], p[1])).collect())?;
        let inner = rasterize_velocity_map(&contour, eps_e, &RasterGeometry::image())?;
        put(out, LsVelocityMap { inner })
    })
}

/// # Safety
/// `v` is a live handle; `nx`, `ny` are NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ls_vmap_dims(v: *const LsVelocityMap, nx: *mut usize, ny: *mut usize) -> LsStatus {
    guard(|| {
        let g = &handle(v, "vmap")?.inner.geometry;
        write_scalar(nx, g.nx);
        write_scalar(ny, g.ny);
        Ok(())
    })
}

/// # Safety
/// `v` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_vmap_free(v: *mut LsVelocityMap) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// First-arrival times (s) from a source at (`x`, `y`) m, written row-major
/// into `tau`, which must hold exactly nx * ny doubles.
///
/// # Safety
/// `v` is a live handle; `tau` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_traveltime(v: *const LsVelocityMap, x: f64, y: f64, tau: *mut f64, len: usize) -> LsStatus {
    guard(|| {
        let v = &handle(v, "vmap")?.inner;
        let need = v.geometry.len();
        if len != need {
            return Err(Failure::BufferSize { need, got: len });
        }
        if tau.is_null() {
            return Err(Failure::Null("tau"));
        }
        let map = solve_travel_time(v, (x, y))?;
        std::slice::from_raw_parts_mut(tau, len).copy_from_slice(&map.tau);
        Ok(())
    })
}

/// Straight-ray backprojection at effective permittivity `eps_e`.
///
/// # Safety
/// `s` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ls_image_tof(s: *const LsSinogram, eps_e: f64, out: *mut *mut LsImage) -> LsStatus {
    guard(|| {
        let s = &handle(s, "sinogram")?.inner;
        let inner = backproject_tof(s, &s.geometry, eps_e, &RasterGeometry::image())?;
        put(out, LsImage { inner })
    })
}

/// Backprojection with eikonal travel times on `v`.
///
/// # Safety
/// `s` and `v` are live handles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ls_image_cgli(
    s: *const LsSinogram,
    v: *const LsVelocityMap,
    out: *mut *mut LsImage,
) -> LsStatus {
    guard(|| {
        let s = &handle(s, "sinogram")?.inner;
        let v = &handle(v, "vmap")?.inner;
        let maps = solve_all_elements(v, &s.geometry)?;
        let inner = backproject_cgli(s, &maps, &v.geometry)?;
        put(out, LsImage { inner })
    })
}

/// Min/max-scaled copy of `img`.
///
/// # Safety
/// `img` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ls_image_normalize(img: *const LsImage, out: *mut *mut LsImage) -> LsStatus {
    guard(|| {
        let inner = normalize_minmax(&handle(img, "image")?.inner);
        put(out, LsImage { inner })
    })
}

/// # Safety
/// `img` is a live handle; `nx`, `ny` are NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ls_image_dims(img: *const LsImage, nx: *mut usize, ny: *mut usize) -> LsStatus {
    guard(|| {
        let g = &handle(img, "image")?.inner.geometry;
        write_scalar(nx, g.nx);
        write_scalar(ny, g.ny);
        Ok(())
    })
}

/// Copies the row-major pixels into `buf`, which must hold nx * ny doubles.
///
/// # Safety
/// `img` is a live handle; `buf` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_image_pixels(img: *const LsImage, buf: *mut f64, len: usize) -> LsStatus {
    guard(|| {
        let px = &handle(img, "image")?.inner.pixels;
        if len != px.len() {
            return Err(Failure::BufferSize { need: px.len(), got: len });
        }
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(px);
        Ok(())
    })
}

/// Writes the image as an f32 LSR1 raster.
///
/// # Safety
/// `img` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ls_image_save(img: *const LsImage, path: *const c_char) -> LsStatus {
    guard(|| {
        let img = &handle(img, "image")?.inner;
        let r = RasterFile::f32(&img.geometry, &img.pixels, RasterMeta::default())?;
        save_raster(&path_arg(path)?, &r)?;
        Ok(())
    })
}

/// # Safety
/// `img` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_image_free(img: *mut LsImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

unsafe fn mask_pair(prob: *const f64, truth: *const u8, n: usize) -> Result<MaskPair, Failure> {
    let p = slice_arg(prob, n, "prob")?.to_vec();
    let t = slice_arg(truth, n, "truth")?.to_vec();
    Ok(MaskPair::new(n, 1, p, t)?)
}

/// Pooled ROC over `n` pixels; reports the operating point with the lowest
/// threshold whose false-alarm rate does not exceed `target_pfa`, and the AUC.
///
/// # Safety
/// `prob` and `truth` hold `n` values; outputs are NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ls_roc_at_pfa(
    prob: *const f64,
    truth: *const u8,
    n: usize,
    target_pfa: f64,
    threshold: *mut f64,
    p_d: *mut f64,
    p_fa: *mut f64,
    auc: *mut f64,
) -> LsStatus {
    guard(|| {
        let curve = roc_curve(&[mask_pair(prob, truth, n)?])?;
        let op = threshold_at_pfa(&curve, target_pfa)?;
        write_scalar(threshold, op.threshold);
        write_scalar(p_d, op.p_d);
        write_scalar(p_fa, op.p_fa);
        write_scalar(auc, curve.auc());
        Ok(())
    })
}

/// F1 and IoU of binary masks.
///
/// # Safety
/// `pred` and `truth` hold `n` values; outputs are NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ls_f1_iou(
    pred: *const u8,
    truth: *const u8,
    n: usize,
    f1: *mut f64,
    iou: *mut f64,
) -> LsStatus {
    guard(|| {
        let c = confusion(&[slice_arg(pred, n, "pred")?], &[slice_arg(truth, n, "truth")?])?;
        write_scalar(f1, c.f1());
        write_scalar(iou, c.iou());
        Ok(())
    })
}

/// Mean binary cross-entropy with clipped probabilities.
///
/// # Safety
/// `prob` and `truth` hold `n` values; `out` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ls_bce(prob: *const f64, truth: *const u8, n: usize, out: *mut f64) -> LsStatus {
    guard(|| {
        write_scalar(out, bce_loss(&[mask_pair(prob, truth, n)?])?);
        Ok(())
    })
}
