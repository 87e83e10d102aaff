#ifndef DOCKNAV_H
#define DOCKNAV_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DknStatus {
  DKN_STATUS_OK = 0,
  DKN_STATUS_NULL_POINTER = 1,
  DKN_STATUS_INVALID_ARGUMENT = 2,
  DKN_STATUS_PARSE = 3,
  DKN_STATUS_IO = 4,
  DKN_STATUS_NUMERICAL = 5,
  DKN_STATUS_PANIC = 6,
} DknStatus;

/**
 * Propagated states, one per step including the initial one.
 */
typedef struct DknEphemeris DknEphemeris;

/**
 * Trained pose regressor.
 */
typedef struct DknModel DknModel;

/**
 * Parsed two-line element set.
 */
typedef struct DknTle DknTle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *dkn_last_error(void);

/**
 * Gram-Schmidt map from a 6D attitude (two stacked columns) to a 3x3 DCM.
 *
 * # Safety
 * `r6` must point to 6 doubles and `out_dcm` to 9 writable doubles.
 */
enum DknStatus dkn_rot6d_to_dcm(const double *r6, double *out_dcm);

/**
 * # Safety
 * `dcm` must point to 9 doubles and `out_q` to 4 writable doubles.
 */
enum DknStatus dkn_dcm_to_quat(const double *dcm, double *out_q);

/**
 * Angle in degrees between two attitudes given as quaternions.
 *
 * # Safety
 * `q_hat` and `q` must point to 4 doubles each.
 */
enum DknStatus dkn_attitude_error_deg(const double *q_hat, const double *q, double *out_deg);

/**
 * Position error divided by the true range.
 *
 * # Safety
 * `t_hat` and `t` must point to 3 doubles each.
 */
enum DknStatus dkn_range_normalized_error(const double *t_hat, const double *t, double *out_frac);

/**
 * # Safety
 * `line1` and `line2` must be NUL-terminated strings; `out` must be writable.
 */
enum DknStatus dkn_tle_parse(const char *line1, const char *line2, struct DknTle **out);

/**
 * # Safety
 * `tle` must come from [`dkn_tle_parse`] and not be used afterwards. NULL is ignored.
 */
void dkn_tle_free(struct DknTle *tle);

/**
 * Propagates with the default force model and spacecraft properties.
 *
 * # Safety
 * `tle` must be a live handle and `out` writable.
 */
enum DknStatus dkn_propagate(const struct DknTle *tle,
                             double duration_s,
                             double dt_s,
                             struct DknEphemeris **out);

/**
 * Number of states; 0 for NULL.
 *
 * # Safety
 * `eph` must be NULL or a live handle.
 */
size_t dkn_ephemeris_len(const struct DknEphemeris *eph);

/**
 * Writes `[rx, ry, rz, vx, vy, vz]` (km, km/s) and seconds since the first state.
 *
 * # Safety
 * `eph` must be a live handle, `out_state` must hold 6 doubles, `out_t` may be NULL.
 */
enum DknStatus dkn_ephemeris_state(const struct DknEphemeris *eph,
                                   size_t index,
                                   double *out_state,
                                   double *out_t);

/**
 * # Safety
 * `eph` must come from [`dkn_propagate`] and not be used afterwards. NULL is ignored.
 */
void dkn_ephemeris_free(struct DknEphemeris *eph);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum DknStatus dkn_model_load(const char *path, struct DknModel **out);

/**
 * Network input size in pixels.
 *
 * # Safety
 * `model` must be a live handle; the outputs must be writable.
 */
enum DknStatus dkn_model_input_size(const struct DknModel *model,
                                    uint32_t *out_width,
                                    uint32_t *out_height);

/**
 * Predicts the target pose from an interleaved RGB8 image whose size is an
 * integer multiple of the input size.
 *
 * # Safety
 * `rgb` must hold `3 * width * height` bytes and `out_pose` 7 writable doubles.
 */
enum DknStatus dkn_model_predict(const struct DknModel *model,
                                 const uint8_t *rgb,
                                 uint32_t width,
                                 uint32_t height,
                                 double *out_pose);

/**
 * # Safety
 * `model` must come from [`dkn_model_load`] and not be used afterwards. NULL is ignored.
 */
void dkn_model_free(struct DknModel *model);

/**
 * Solves the mocap statics from `n` samples of 21 doubles each: the poses
 * `T_oi`, `T_os` and `T_cb`. Writes `T_ic` and `T_sb` and, when non-NULL,
 * the RMS residuals in degrees and metres.
 *
 * # Safety
 * `samples` must hold `21 * n` doubles; `out_t_ic` and `out_t_sb` 7 writable
 * doubles each; `out_residuals` NULL or 2 writable doubles.
 */
enum DknStatus dkn_calibrate(const double *samples,
                             size_t n,
                             double *out_t_ic,
                             double *out_t_sb,
                             double *out_residuals);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOCKNAV_H */
