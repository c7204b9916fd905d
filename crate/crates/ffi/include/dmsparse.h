#ifndef DMSPARSE_H
#define DMSPARSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  DMS_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  DMS_STATUS_NULL_POINTER = 1,
  /**
   * A parameter or input violates the operation's preconditions.
   */
  DMS_STATUS_INVALID_INPUT = 2,
  /**
   * A numerical routine failed (e.g. a rank-deficient least-squares fit).
   */
  DMS_STATUS_NUMERIC = 3,
  /**
   * File could not be read or written.
   */
  DMS_STATUS_IO = 4,
  /**
   * A caller-provided output buffer has the wrong length.
   */
  DMS_STATUS_BUFFER_SIZE = 5,
  /**
   * Internal panic; the library state is still usable.
   */
  DMS_STATUS_PANIC = 6,
} DmsStatus;

/**
 * Opaque DM/ADM bitstream.
 */
typedef struct DmsBitstream DmsBitstream;

/**
 * ADM step adaptation.
 */
typedef struct {
  double delta0;
  double growth;
  double delta_min;
  double delta_max;
} DmsAdmParams;

/**
 * IMAT settings. `beta_fraction > 0` scales the first iterate's spectral
 * peak; otherwise `beta` is used as a fixed initial threshold.
 * `guard_gamma <= 0` disables the threshold floor.
 */
typedef struct {
  double lambda;
  double beta;
  double beta_fraction;
  double alpha;
  size_t max_iters;
  double guard_gamma;
  double guard_delta;
} DmsImatParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *dms_last_error(void);

/**
 * Library defaults: K = 1.5, steps clamped to `[delta0/16, 16 delta0]`.
 */
DmsAdmParams dms_adm_params_default(double delta0);

DmsImatParams dms_imat_params_default(void);

/**
 * Bitstream from `n` symbols, each +1 or -1; anything else is rejected.
 *
 * # Safety
 * `symbols` must be valid for `n` reads and `out` for one write.
 */
DmsStatus dms_bitstream_new(const int8_t *symbols,
                            size_t n,
                            double delta,
                            bool adaptive,
                            DmsBitstream **out);

/**
 * # Safety
 * `bits` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void dms_bitstream_free(DmsBitstream *bits);

/**
 * # Safety
 * `bits` must be null or a live handle.
 */
size_t dms_bitstream_len(const DmsBitstream *bits);

/**
 * Step size, or the initial step for ADM streams. NaN for a null handle.
 *
 * # Safety
 * `bits` must be null or a live handle.
 */
double dms_bitstream_delta(const DmsBitstream *bits);

/**
 * # Safety
 * `bits` must be null or a live handle.
 */
bool dms_bitstream_is_adaptive(const DmsBitstream *bits);

/**
 * Copies the symbols into `out`, which must hold exactly `len` values.
 *
 * # Safety
 * `bits` must be a live handle and `out` valid for `len` writes.
 */
DmsStatus dms_bitstream_symbols(const DmsBitstream *bits, int8_t *out, size_t len);

/**
 * # Safety
 * `bits` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
DmsStatus dms_bitstream_write(const DmsBitstream *bits, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string and `out` valid for one write.
 */
DmsStatus dms_bitstream_read(const char *path, DmsBitstream **out);

/**
 * Plain DM encoding of `n` samples. `staircase` may be null; otherwise it
 * receives the encoder's `n` staircase values.
 *
 * # Safety
 * `x` must be valid for `n` reads, `staircase` null or valid for `n` writes,
 * `out` valid for one write.
 */
DmsStatus dms_dm_encode(const double *x,
                        size_t n,
                        double delta,
                        DmsBitstream **out,
                        double *staircase);

/**
 * Adaptive DM encoding; see [`dms_dm_encode`].
 *
 * # Safety
 * As [`dms_dm_encode`]; `params` must be valid for one read.
 */
DmsStatus dms_adm_encode(const double *x,
                         size_t n,
                         const DmsAdmParams *params,
                         DmsBitstream **out,
                         double *staircase);

/**
 * Decodes `bits` into `out` (`len` must equal the stream length). ADM
 * streams need `adm`; it is ignored for plain DM and may be null.
 *
 * # Safety
 * `bits` must be a live handle, `adm` null or valid, `out` valid for `len`
 * writes.
 */
DmsStatus dms_decode(const DmsBitstream *bits, const DmsAdmParams *adm, double *out, size_t len);

/**
 * Writes `d(n)` as 0/1 into `mask` and the retained fraction into `rate`
 * (which may be null).
 *
 * # Safety
 * `bits` must be a live handle, `mask` valid for `len` writes, `rate` null or
 * valid for one write.
 */
DmsStatus dms_extract_mask(const DmsBitstream *bits, uint8_t *mask, size_t len, double *rate);

/**
 * SNR of `estimate` against `reference` in dB, capped at 100.
 *
 * # Safety
 * Both arrays must be valid for `n` reads; `out` for one write.
 */
DmsStatus dms_snr_db(const double *reference, const double *estimate, size_t n, double *out);

/**
 * IMAT from the retained samples `y` at positions where `mask` is nonzero.
 * `params` may be null for the defaults.
 *
 * # Safety
 * `y`, `mask` and `out` must be valid for `n` elements; `params` null or
 * valid.
 */
DmsStatus dms_imat(const double *y,
                   const uint8_t *mask,
                   size_t n,
                   const DmsImatParams *params,
                   double *out);

/**
 * IMATDM: moving average of even length `smoothing_len` over the retained
 * samples, then IMAT.
 *
 * # Safety
 * As [`dms_imat`].
 */
DmsStatus dms_imatdm(const double *y,
                     const uint8_t *mask,
                     size_t n,
                     size_t smoothing_len,
                     const DmsImatParams *params,
                     double *out);

/**
 * OMP over conjugate bin pairs, at most `max_atoms` pairs, stopping once the
 * residual norm is at most `residual_tol`. `atoms_used` may be null.
 *
 * # Safety
 * As [`dms_imat`]; `atoms_used` null or valid for one write.
 */
DmsStatus dms_omp(const double *y,
                  const uint8_t *mask,
                  size_t n,
                  size_t max_atoms,
                  double residual_tol,
                  double *out,
                  size_t *atoms_used);

/**
 * LASSO by proximal gradient. `converged` may be null; a run that hits
 * `max_iters` still returns its best iterate with `*converged = false`.
 *
 * # Safety
 * As [`dms_imat`]; `converged` null or valid for one write.
 */
DmsStatus dms_lasso(const double *y,
                    const uint8_t *mask,
                    size_t n,
                    double reg,
                    size_t max_iters,
                    double tol,
                    double *out,
                    bool *converged);

/**
 * Windowed-sinc lowpass of a full staircase, aligned with the input.
 *
 * # Safety
 * `staircase` and `out` must be valid for `n` elements.
 */
DmsStatus dms_lowpass(const double *staircase,
                      size_t n,
                      double sample_rate,
                      double cutoff_hz,
                      size_t taps,
                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DMSPARSE_H */
