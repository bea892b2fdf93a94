#ifndef DCM_H
#define DCM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DcmStatus {
  DCM_STATUS_OK = 0,
  DCM_STATUS_NULL_POINTER = 1,
  DCM_STATUS_INVALID_UTF8 = 2,
  DCM_STATUS_INVALID_ARGUMENT = 3,
  DCM_STATUS_NOT_FOUND = 4,
  DCM_STATUS_UNKNOWN_PLACE = 5,
  DCM_STATUS_DIALOGUE_FAILED = 6,
  DCM_STATUS_CONFIG = 7,
  DCM_STATUS_IO = 8,
  DCM_STATUS_INTERNAL = 9,
  DCM_STATUS_PANIC = 10,
} DcmStatus;

/**
 * Opaque engine handle.
 */
typedef struct DcmEngine DcmEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an engine from a TOML config, or defaults when `config_toml` is
 * null.
 *
 * # Safety
 * `config_toml` is null or a NUL-terminated string; `out_engine` is valid
 * for writes.
 */
enum DcmStatus dcm_engine_new(const char *config_toml, struct DcmEngine **out_engine);

/**
 * # Safety
 * `engine` is null or a handle from [`dcm_engine_new`] not yet freed.
 */
void dcm_engine_free(struct DcmEngine *engine);

/**
 * Ingests an utterance on the current day. Pass NaN as `emotion` to score
 * it from the text.
 *
 * # Safety
 * Pointers are valid; strings are NUL-terminated.
 */
enum DcmStatus dcm_ingest(struct DcmEngine *engine,
                          const char *session_id,
                          const char *text,
                          double emotion,
                          char **out_json);

/**
 * Ingests a photo caption taken at a gazetteer place.
 *
 * # Safety
 * Pointers are valid; strings are NUL-terminated.
 */
enum DcmStatus dcm_ingest_caption(struct DcmEngine *engine,
                                  const char *session_id,
                                  const char *caption,
                                  const char *location,
                                  char **out_json);

/**
 * Advances simulated time by `days`, returning the lifecycle report.
 *
 * # Safety
 * Pointers are valid.
 */
enum DcmStatus dcm_tick(struct DcmEngine *engine, uint32_t days, char **out_json);

/**
 * Builds a context bundle for `query`; `k == 0` uses the configured size.
 *
 * # Safety
 * Pointers are valid; strings are NUL-terminated.
 */
enum DcmStatus dcm_build_context(struct DcmEngine *engine,
                                 const char *query,
                                 size_t k,
                                 char **out_json);

/**
 * Builds a bundle for `query` and asks the dialogue client for a reply:
 * `{"response_text": ..., "bundle": ...}`.
 *
 * # Safety
 * Pointers are valid; strings are NUL-terminated.
 */
enum DcmStatus dcm_respond(struct DcmEngine *engine, const char *query, char **out_json);

/**
 * Deletes one contribution, returning the deletion receipt.
 *
 * # Safety
 * Pointers are valid; strings are NUL-terminated.
 */
enum DcmStatus dcm_delete_contribution(struct DcmEngine *engine,
                                       const char *contribution_id,
                                       char **out_json);

/**
 * The avatar expression state for the current graph.
 *
 * # Safety
 * Pointers are valid.
 */
enum DcmStatus dcm_expression(struct DcmEngine *engine, char **out_json);

/**
 * `{"hash": <sha256 hex>, "graph": <canonical graph JSON>}`.
 *
 * # Safety
 * Pointers are valid.
 */
enum DcmStatus dcm_snapshot(struct DcmEngine *engine, char **out_json);

/**
 * Message of the last failed call on this thread, or null. Owned by the
 * library; do not free.
 */
const char *dcm_last_error(void);

/**
 * Frees a string returned through `out_json`.
 *
 * # Safety
 * `s` is null or a string from this library not yet freed.
 */
void dcm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCM_H */
