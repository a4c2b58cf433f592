#ifndef CVOC_H
#define CVOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Noise mask request: off, or on with the given polarity.
 */
typedef enum CvocCnm {
  CVOC_CNM_OFF = 0,
  CVOC_CNM_LITERAL = 1,
  CVOC_CNM_INVERTED = 2,
} CvocCnm;

/**
 * Synthesis engine selector.
 */
typedef enum CvocEngine {
  CVOC_ENGINE_SOURCE_FILTER = 0,
  CVOC_ENGINE_SINUSOIDAL = 1,
} CvocEngine;

/**
 * Temporal envelope used by the source-filter engine.
 */
typedef enum CvocEnvelope {
  CVOC_ENVELOPE_AMPLITUDE = 0,
  CVOC_ENVELOPE_HILBERT = 1,
  CVOC_ENVELOPE_TRIANGULAR = 2,
  CVOC_ENVELOPE_TRUE_ENVELOPE = 3,
  CVOC_ENVELOPE_NO_ENVELOPE = 4,
} CvocEnvelope;

/**
 * Pitch refinement selector.
 */
typedef enum CvocRefine {
  CVOC_REFINE_NONE = 0,
  CVOC_REFINE_AKF = 1,
  CVOC_REFINE_TIMEWARP = 2,
  CVOC_REFINE_STONE_MASK = 3,
} CvocRefine;

/**
 * Result of every fallible call.
 */
typedef enum CvocStatus {
  CVOC_STATUS_OK = 0,
  CVOC_STATUS_NULL_POINTER = 1,
  CVOC_STATUS_INVALID_ARGUMENT = 2,
  CVOC_STATUS_IO = 3,
  CVOC_STATUS_FORMAT = 4,
  CVOC_STATUS_EMPTY_INPUT = 5,
  CVOC_STATUS_MISSING_TRACK = 6,
  CVOC_STATUS_NUMERIC = 7,
  CVOC_STATUS_BUFFER_TOO_SMALL = 8,
  CVOC_STATUS_PANIC = 9,
} CvocStatus;

/**
 * Opaque analysis bundle.
 */
typedef struct CvocBundle CvocBundle;

/**
 * Opaque mono waveform.
 */
typedef struct CvocWaveform CvocWaveform;

/**
 * Analysis options. Start from [`cvoc_analysis_options_default`]. Enum
 * fields must hold one of the declared values; anything else is undefined.
 */
typedef struct CvocAnalysisOptions {
  double frame_shift;
  /**
   * 24 or 60.
   */
  uint32_t mgc_order;
  double alpha;
  double f0_min;
  double f0_max;
  enum CvocRefine refine;
  enum CvocEnvelope envelope;
  bool hnr;
  bool basis;
  enum CvocCnm cnm;
  double cnm_threshold;
} CvocAnalysisOptions;

/**
 * Synthesis options. Start from [`cvoc_synthesis_options_default`]. Enum
 * fields must hold one of the declared values; anything else is undefined.
 */
typedef struct CvocSynthesisOptions {
  enum CvocEngine engine;
  uint64_t seed;
  bool use_cnm;
  double cnm_threshold;
} CvocSynthesisOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *cvoc_last_error(void);

/**
 * Static, NUL-terminated library version.
 */
const char *cvoc_version(void);

struct CvocAnalysisOptions cvoc_analysis_options_default(void);

struct CvocSynthesisOptions cvoc_synthesis_options_default(void);

/**
 * Copies `len` samples into a new waveform.
 *
 * # Safety
 * `samples` must point to `len` readable doubles; `out` must be writable.
 */
enum CvocStatus cvoc_waveform_new(const double *samples,
                                  size_t len,
                                  uint32_t sample_rate,
                                  struct CvocWaveform **out);

/**
 * Reads a 16-bit mono PCM WAV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CvocStatus cvoc_waveform_read_wav(const char *path, struct CvocWaveform **out);

/**
 * # Safety
 * `w` must be a live handle and `path` a NUL-terminated string.
 */
enum CvocStatus cvoc_waveform_write_wav(const struct CvocWaveform *w, const char *path);

/**
 * Number of samples; 0 for a null handle.
 *
 * # Safety
 * `w` must be null or a live handle.
 */
size_t cvoc_waveform_len(const struct CvocWaveform *w);

/**
 * # Safety
 * `w` must be null or a live handle.
 */
uint32_t cvoc_waveform_sample_rate(const struct CvocWaveform *w);

/**
 * Copies the samples into `buf` (capacity `cap`). `len_out`, when not null,
 * receives the sample count; a null `buf` only queries the length.
 *
 * # Safety
 * `buf` must hold `cap` writable doubles; `len_out` must be null or writable.
 */
enum CvocStatus cvoc_waveform_copy_samples(const struct CvocWaveform *w,
                                           double *buf,
                                           size_t cap,
                                           size_t *len_out);

/**
 * # Safety
 * `w` must be null or a handle not yet freed.
 */
void cvoc_waveform_free(struct CvocWaveform *w);

/**
 * Runs the full analysis. A null `opts` uses the defaults.
 *
 * # Safety
 * `w` must be a live handle, `opts` null or readable, `out` writable.
 */
enum CvocStatus cvoc_analyze(const struct CvocWaveform *w,
                             const struct CvocAnalysisOptions *opts,
                             struct CvocBundle **out);

/**
 * Synthesizes a waveform from a bundle. A null `opts` uses the defaults.
 *
 * # Safety
 * `b` must be a live handle, `opts` null or readable, `out` writable.
 */
enum CvocStatus cvoc_synthesize(const struct CvocBundle *b,
                                const struct CvocSynthesisOptions *opts,
                                struct CvocWaveform **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CvocStatus cvoc_bundle_read(const char *path, struct CvocBundle **out);

/**
 * # Safety
 * `b` must be a live handle and `path` a NUL-terminated string.
 */
enum CvocStatus cvoc_bundle_write(const struct CvocBundle *b, const char *path);

/**
 * Frame count; 0 for a null handle.
 *
 * # Safety
 * `b` must be null or a live handle.
 */
size_t cvoc_bundle_num_frames(const struct CvocBundle *b);

/**
 * Copies the contF0 track (Hz per frame). Same buffer protocol as
 * [`cvoc_waveform_copy_samples`].
 *
 * # Safety
 * `buf` must hold `cap` writable doubles; `len_out` must be null or writable.
 */
enum CvocStatus cvoc_bundle_copy_f0(const struct CvocBundle *b,
                                    double *buf,
                                    size_t cap,
                                    size_t *len_out);

/**
 * Copies the maximum voiced frequency track (Hz per frame).
 *
 * # Safety
 * As for [`cvoc_bundle_copy_f0`].
 */
enum CvocStatus cvoc_bundle_copy_mvf(const struct CvocBundle *b,
                                     double *buf,
                                     size_t cap,
                                     size_t *len_out);

/**
 * # Safety
 * `b` must be null or a handle not yet freed.
 */
void cvoc_bundle_free(struct CvocBundle *b);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVOC_H */
