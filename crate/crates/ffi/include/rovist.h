#ifndef ROVIST_H
#define ROVIST_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum RovistStatus {
  ROVIST_STATUS_OK = 0,
  ROVIST_STATUS_NULL_ARGUMENT = 1,
  ROVIST_STATUS_INVALID_UTF8 = 2,
  ROVIST_STATUS_INVALID_ARGUMENT = 3,
  ROVIST_STATUS_IO = 4,
  ROVIST_STATUS_SCHEMA = 5,
  ROVIST_STATUS_CONFIG = 6,
  ROVIST_STATUS_BACKEND = 7,
  ROVIST_STATUS_MISSING_REGIONS = 8,
  ROVIST_STATUS_UNDEFINED = 9,
  ROVIST_STATUS_ARTIFACT = 10,
  ROVIST_STATUS_PANIC = 99,
} RovistStatus;

/**
 * Opaque idf table.
 */
typedef struct RovistIdf RovistIdf;

/**
 * Opaque scorer: the configured components plus the region index.
 */
typedef struct RovistScorer RovistScorer;

typedef struct RovistRedundancy {
  double inter;
  double intra;
  double final_score;
} RovistRedundancy;

typedef struct RovistCorrelation {
  double spearman_rho;
  double pearson_r;
  double kendall_tau;
  size_t sample_size;
} RovistCorrelation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Free it with
 * `rovist_string_free`.
 */
char *rovist_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rovist_string_free(char *s);

/**
 * Library version, statically allocated.
 */
const char *rovist_version(void);

/**
 * Maps a raw grounding score into (−1, 1).
 */
double rovist_scale_score(double raw);

/**
 * Jaccard similarity of the word sets of two sentences.
 *
 * # Safety
 * `a` and `b` must be NUL-terminated strings; `out` must be writable.
 */
enum RovistStatus rovist_jaccard(const char *a, const char *b, double *out);

/**
 * Non-redundancy of a story given as `count` sentences.
 *
 * # Safety
 * `sentences` must point to `count` NUL-terminated strings; `out` must be
 * writable.
 */
enum RovistStatus rovist_nr_score(const char *const *sentences,
                                  size_t count,
                                  size_t ngram,
                                  struct RovistRedundancy *out);

/**
 * Spearman, Pearson and Kendall tau-b between two samples of length `n`.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles; `out` must be writable.
 */
enum RovistStatus rovist_correlate(const double *x,
                                   const double *y,
                                   size_t n,
                                   struct RovistCorrelation *out);

/**
 * Loads an idf table written by `rovist build-idf`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RovistStatus rovist_idf_load(const char *path, struct RovistIdf **out);

/**
 * idf of a word or phrase (mean over its tokens).
 *
 * # Safety
 * `idf` must be a live handle, `phrase` a NUL-terminated string and `out`
 * writable.
 */
enum RovistStatus rovist_idf_lookup(const struct RovistIdf *idf, const char *phrase, double *out);

/**
 * # Safety
 * `idf` must be null or a handle from `rovist_idf_load` not yet freed.
 */
void rovist_idf_free(struct RovistIdf *idf);

/**
 * Builds a scorer from artifact paths; any path may be null to leave that
 * component out. Grounding needs both `vg_params` and `regions`; it weights
 * nouns by idf only when `idf_table` is given. `ngram` of 0 disables the
 * non-redundancy component. Stub word and vision backends are used.
 *
 * # Safety
 * Non-null paths must be NUL-terminated strings; `out` must be writable.
 */
enum RovistStatus rovist_scorer_open(const char *vg_params,
                                     const char *coherence_model,
                                     const char *regions,
                                     const char *idf_table,
                                     size_t ngram,
                                     struct RovistScorer **out);

/**
 * Scores one story given as a JSON object and returns the report as JSON.
 * Free the report with `rovist_string_free`.
 *
 * # Safety
 * `scorer` must be a live handle, `story_json` a NUL-terminated string and
 * `report_json` writable.
 */
enum RovistStatus rovist_scorer_score_json(const struct RovistScorer *scorer,
                                           const char *story_json,
                                           char **report_json);

/**
 * # Safety
 * `scorer` must be null or a handle from `rovist_scorer_open` not yet freed.
 */
void rovist_scorer_free(struct RovistScorer *scorer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROVIST_H */
