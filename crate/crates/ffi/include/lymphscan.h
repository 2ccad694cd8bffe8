/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef LYMPHSCAN_H
#define LYMPHSCAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values from -10 down mirror the library's error categories.
 */
typedef enum {
  LS_OK = 0,
  LS_ERR_NULL_POINTER = -1,
  LS_ERR_PANIC = -2,
  LS_ERR_UTF8 = -3,
  LS_ERR_BUFFER_SIZE = -4,
  LS_ERR_SPEC_GEOMETRY = -10,
  LS_ERR_EMPTY_SCENE = -11,
  LS_ERR_DEGENERATE_CONTOUR = -12,
  LS_ERR_STABILITY = -13,
  LS_ERR_OUT_OF_DOMAIN = -14,
  LS_ERR_SHAPE_MISMATCH = -15,
  LS_ERR_INSUFFICIENT_DATA = -16,
  LS_ERR_FIT = -17,
  LS_ERR_SOURCE_OUT_OF_DOMAIN = -18,
  LS_ERR_NONPOSITIVE_SPEED = -19,
  LS_ERR_DEGENERATE_LABELS = -20,
  LS_ERR_INVALID_ARGUMENT = -21,
  LS_ERR_FORMAT = -22,
  LS_ERR_CONFIG = -23,
  LS_ERR_IO = -24,
} LsStatus;

/**
 * Backprojected image on the 256 x 256 image grid.
 */
typedef struct LsImage LsImage;

/**
 * Calibrated sinogram.
 */
typedef struct LsSinogram LsSinogram;

/**
 * Velocity map on a raster.
 */
typedef struct LsVelocityMap LsVelocityMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on this thread.
 */
const char *ls_last_error_message(void);

/**
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
LsStatus ls_sinogram_load(const char *path, LsSinogram **out);

/**
 * # Safety
 * `s` is NULL or a live handle.
 */
size_t ls_sinogram_elements(const LsSinogram *s);

/**
 * # Safety
 * `s` is NULL or a live handle.
 */
size_t ls_sinogram_samples(const LsSinogram *s);

/**
 * # Safety
 * `s` is NULL or a handle not yet freed.
 */
void ls_sinogram_free(LsSinogram *s);

/**
 * Loads an LSR1 velocity map.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
LsStatus ls_vmap_load(const char *path, LsVelocityMap **out);

/**
 * Two-valued map on the image grid: `c / sqrt(eps_e)` inside the closed
 * contour given as `n_vertices` interleaved x, y pairs (m), `c` outside.
 *
 * # Safety
 * `xy` holds `2 * n_vertices` doubles; `out` is writable.
 */
LsStatus ls_vmap_from_contour(const double *xy,
                              size_t n_vertices,
                              double eps_e,
                              LsVelocityMap **out);

/**
 * # Safety
 * `v` is a live handle; `nx`, `ny` are NULL or writable.
 */
LsStatus ls_vmap_dims(const LsVelocityMap *v, size_t *nx, size_t *ny);

/**
 * # Safety
 * `v` is NULL or a handle not yet freed.
 */
void ls_vmap_free(LsVelocityMap *v);

/**
 * First-arrival times (s) from a source at (`x`, `y`) m, written row-major
 * into `tau`, which must hold exactly nx * ny doubles.
 *
 * # Safety
 * `v` is a live handle; `tau` holds `len` doubles.
 */
LsStatus ls_traveltime(const LsVelocityMap *v, double x, double y, double *tau, size_t len);

/**
 * Straight-ray backprojection at effective permittivity `eps_e`.
 *
 * # Safety
 * `s` is a live handle; `out` is writable.
 */
LsStatus ls_image_tof(const LsSinogram *s, double eps_e, LsImage **out);

/**
 * Backprojection with eikonal travel times on `v`.
 *
 * # Safety
 * `s` and `v` are live handles; `out` is writable.
 */
LsStatus ls_image_cgli(const LsSinogram *s, const LsVelocityMap *v, LsImage **out);

/**
 * Min/max-scaled copy of `img`.
 *
 * # Safety
 * `img` is a live handle; `out` is writable.
 */
LsStatus ls_image_normalize(const LsImage *img, LsImage **out);

/**
 * # Safety
 * `img` is a live handle; `nx`, `ny` are NULL or writable.
 */
LsStatus ls_image_dims(const LsImage *img, size_t *nx, size_t *ny);

/**
 * Copies the row-major pixels into `buf`, which must hold nx * ny doubles.
 *
 * # Safety
 * `img` is a live handle; `buf` holds `len` doubles.
 */
LsStatus ls_image_pixels(const LsImage *img, double *buf, size_t len);

/**
 * Writes the image as an f32 LSR1 raster.
 *
 * # Safety
 * `img` is a live handle; `path` is a NUL-terminated string.
 */
LsStatus ls_image_save(const LsImage *img, const char *path);

/**
 * # Safety
 * `img` is NULL or a handle not yet freed.
 */
void ls_image_free(LsImage *img);

/**
 * Pooled ROC over `n` pixels; reports the operating point with the lowest
 * threshold whose false-alarm rate does not exceed `target_pfa`, and the AUC.
 *
 * # Safety
 * `prob` and `truth` hold `n` values; outputs are NULL or writable.
 */
LsStatus ls_roc_at_pfa(const double *prob,
                       const uint8_t *truth,
                       size_t n,
                       double target_pfa,
                       double *threshold,
                       double *p_d,
                       double *p_fa,
                       double *auc);

/**
 * F1 and IoU of binary masks.
 *
 * # Safety
 * `pred` and `truth` hold `n` values; outputs are NULL or writable.
 */
LsStatus ls_f1_iou(const uint8_t *pred, const uint8_t *truth, size_t n, double *f1, double *iou);

/**
 * Mean binary cross-entropy with clipped probabilities.
 *
 * # Safety
 * `prob` and `truth` hold `n` values; `out` is NULL or writable.
 */
LsStatus ls_bce(const double *prob, const uint8_t *truth, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LYMPHSCAN_H */
