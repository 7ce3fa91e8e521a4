#ifndef GAZECUE_H
#define GAZECUE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_ARGUMENT = 1,
  GC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Correspondences do not determine a rotation.
   */
  GC_STATUS_DEGENERATE = 3,
  /**
   * The ray misses the box.
   */
  GC_STATUS_NO_HIT = 4,
  GC_STATUS_CONFIG = 5,
  /**
   * Nothing queued.
   */
  GC_STATUS_EMPTY = 6,
  GC_STATUS_IO = 7,
  GC_STATUS_INTERNAL = 8,
} GcStatus;

/**
 * Opaque session: an engine behind the session layer, fed by the caller.
 */
typedef struct GcSession GcSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns a copy of the calling thread's last error message, or NULL if
 * none was recorded. Free with `gc_string_free`.
 */
char *gc_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void gc_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gc_version(void);

/**
 * Entry distance of a ray into an axis-aligned box. Writes `t` (0 when the
 * origin is inside) and returns `GC_STATUS_OK`, or returns
 * `GC_STATUS_NO_HIT`.
 *
 * # Safety
 * All pointers must reference 3 readable doubles; `t_out` one writable double.
 */
enum GcStatus gc_ray_aabb(const double *origin,
                          const double *dir,
                          const double *center,
                          const double *half,
                          double *t_out);

/**
 * Least-squares rigid transform mapping `from[i]` onto `to[i]`. Points are
 * packed xyz triples, `n` pairs. Writes the rotation quaternion (w, x, y, z),
 * the translation and, if `rms_out` is not NULL, the RMS residual.
 *
 * # Safety
 * `from` and `to` must hold `3 * n` doubles; `quat_wxyz` 4 and
 * `translation` 3 writable doubles.
 */
enum GcStatus gc_align(const double *from,
                       const double *to,
                       size_t n,
                       double *quat_wxyz,
                       double *translation,
                       double *rms_out);

/**
 * Creates a session. `engine_json` is an engine config object (NULL for
 * defaults). `pois_json` is an array of `{"id", "position": [x, y, z],
 * "label"}` objects (NULL for none). `log_path`, if not NULL, receives the
 * NDJSON session log. Returns NULL on failure.
 *
 * # Safety
 * Non-NULL arguments must be NUL-terminated strings.
 */
struct GcSession *gc_session_new(const char *engine_json,
                                 const char *pois_json,
                                 const char *session_id,
                                 const char *log_path);

/**
 * # Safety
 * `s` must be NULL or a live session from `gc_session_new`.
 */
void gc_session_free(struct GcSession *s);

/**
 * Opens a connection and writes its id to `conn_out`.
 *
 * # Safety
 * `s` must be a live session, `conn_out` writable.
 */
enum GcStatus gc_session_connect(struct GcSession *s, uint64_t *conn_out);

/**
 * # Safety
 * `s` must be a live session.
 */
enum GcStatus gc_session_disconnect(struct GcSession *s, uint64_t conn);

/**
 * Feeds one inbound wire line from `conn`, received at `at_us`. Replies and
 * broadcasts are queued for `gc_session_poll`.
 *
 * # Safety
 * `s` live, `line` a NUL-terminated string.
 */
enum GcStatus gc_session_line(struct GcSession *s, uint64_t conn, int64_t at_us, const char *line);

/**
 * Advances the session clock to `at_us`.
 *
 * # Safety
 * `s` must be a live session.
 */
enum GcStatus gc_session_tick(struct GcSession *s, int64_t at_us);

/**
 * Pops the next queued delivery. Writes the target connection and either
 * the line (free with `gc_string_free`) or NULL when the connection is to
 * be closed. Returns `GC_STATUS_EMPTY` when nothing is queued.
 *
 * # Safety
 * `s` live, `conn_out` and `line_out` writable.
 */
enum GcStatus gc_session_poll(struct GcSession *s, uint64_t *conn_out, char **line_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAZECUE_H */
