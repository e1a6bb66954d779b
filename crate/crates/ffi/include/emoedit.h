#ifndef EMOEDIT_H
#define EMOEDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define EMOEDIT_FORMAT_CSV 0

#define EMOEDIT_FORMAT_JSON 1

#define EMOEDIT_LEVEL_UTTERANCE 0

#define EMOEDIT_LEVEL_WORD 1

#define EMOEDIT_LEVEL_PHONEME 2

/**
 * Result of every fallible call.
 */
typedef enum EmoeditStatus {
  EMOEDIT_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  EMOEDIT_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  EMOEDIT_STATUS_INVALID_UTF8 = 2,
  /**
   * An integer argument was out of range (format, level, index).
   */
  EMOEDIT_STATUS_INVALID_ARGUMENT = 3,
  EMOEDIT_STATUS_AUDIO = 4,
  EMOEDIT_STATUS_ALIGNMENT = 5,
  EMOEDIT_STATUS_FEATURES = 6,
  EMOEDIT_STATUS_RANKER = 7,
  EMOEDIT_STATUS_HED = 8,
  EMOEDIT_STATUS_EDITOR = 9,
  EMOEDIT_STATUS_IO = 10,
  /**
   * Any other library error.
   */
  EMOEDIT_STATUS_OTHER = 11,
  /**
   * A Rust panic was caught at the boundary; this is a bug.
   */
  EMOEDIT_STATUS_PANIC = 12,
} EmoeditStatus;

/**
 * A loaded model bank (one ranker per emotion and level).
 */
typedef struct EmoeditBank EmoeditBank;

/**
 * A HED matrix: one row per phoneme, `3 * K` intensities per row.
 */
typedef struct EmoeditHed EmoeditHed;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *emoedit_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * library call on the same thread.
 */
const char *emoedit_last_error_message(void);

/**
 * Dotted error code of the last failure (e.g. `hed.validation`), or NULL.
 */
const char *emoedit_last_error_code(void);

/**
 * Loads a model bank directory written by `emoedit train`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum EmoeditStatus emoedit_bank_load(const char *dir, struct EmoeditBank **out);

/**
 * # Safety
 * `bank` must be NULL or a handle from [`emoedit_bank_load`] not yet freed.
 */
void emoedit_bank_free(struct EmoeditBank *bank);

/**
 * Number of emotions in the bank (0 for NULL).
 *
 * # Safety
 * `bank` must be NULL or a live handle.
 */
size_t emoedit_bank_emotion_count(const struct EmoeditBank *bank);

/**
 * Extracts a HED matrix from WAV bytes and an alignment (JSON or TextGrid text).
 *
 * # Safety
 * `wav` must point to `wav_len` readable bytes; `alignment` must be a
 * NUL-terminated string; `out` must be writable.
 */
enum EmoeditStatus emoedit_extract(const struct EmoeditBank *bank,
                                   const uint8_t *wav,
                                   size_t wav_len,
                                   const char *alignment,
                                   struct EmoeditHed **out);

/**
 * Parses a HED document in the given format (`EMOEDIT_FORMAT_*`).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum EmoeditStatus emoedit_hed_parse(const char *text, uint32_t format, struct EmoeditHed **out);

/**
 * # Safety
 * `hed` must be NULL or a live HED handle.
 */
void emoedit_hed_free(struct EmoeditHed *hed);

/**
 * Number of rows (phonemes); 0 for NULL.
 *
 * # Safety
 * `hed` must be NULL or a live HED handle.
 */
size_t emoedit_hed_rows(const struct EmoeditHed *hed);

/**
 * Number of emotions K; 0 for NULL.
 *
 * # Safety
 * `hed` must be NULL or a live HED handle.
 */
size_t emoedit_hed_emotion_count(const struct EmoeditHed *hed);

/**
 * Reads one intensity.
 *
 * # Safety
 * `hed` must be a live HED handle; `out` must be writable.
 */
enum EmoeditStatus emoedit_hed_value(const struct EmoeditHed *hed,
                                     size_t row,
                                     uint32_t level,
                                     size_t emotion,
                                     double *out);

/**
 * Applies an edit script (JSON) and returns a new handle; `hed` is unchanged.
 *
 * # Safety
 * `hed` must be a live HED handle; `script_json` a NUL-terminated string;
 * `out` must be writable.
 */
enum EmoeditStatus emoedit_hed_apply(const struct EmoeditHed *hed,
                                     const char *script_json,
                                     struct EmoeditHed **out);

/**
 * Serializes a HED matrix; free the result with [`emoedit_string_free`].
 *
 * # Safety
 * `hed` must be a live HED handle; `out` must be writable.
 */
enum EmoeditStatus emoedit_hed_export(const struct EmoeditHed *hed, uint32_t format, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void emoedit_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMOEDIT_H */
