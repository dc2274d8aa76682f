/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GESTUREKIT_H
#define GESTUREKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GkStatus {
  GK_STATUS_OK = 0,
  GK_STATUS_NULL_POINTER = 1,
  GK_STATUS_INVALID_UTF8 = 2,
  GK_STATUS_VALIDATION = 3,
  GK_STATUS_IO = 4,
  GK_STATUS_TRANSPORT = 5,
  GK_STATUS_INTERNAL = 6,
} GkStatus;

/**
 * Opaque motion clip handle.
 */
typedef struct GkClip GkClip;

/**
 * Opaque gesture dictionary handle.
 */
typedef struct GkDictionary GkDictionary;

typedef struct GkLossReport {
  double position_l1;
  double velocity_l1;
  double acceleration_l1;
  double total;
} GkLossReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gk_version(void);

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *gk_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void gk_string_free(char *s);

/**
 * Parses a motion clip from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum GkStatus gk_clip_load_json(const char *json, struct GkClip **out);

/**
 * # Safety
 * `clip` must be NULL or a handle from `gk_clip_load_json`, freed once.
 */
void gk_clip_free(struct GkClip *clip);

/**
 * Frame count, or 0 for NULL.
 *
 * # Safety
 * `clip` must be NULL or a live handle.
 */
size_t gk_clip_frame_count(const struct GkClip *clip);

/**
 * Joint count, or 0 for NULL.
 *
 * # Safety
 * `clip` must be NULL or a live handle.
 */
size_t gk_clip_joint_count(const struct GkClip *clip);

/**
 * Frame rate, or 0 for NULL.
 *
 * # Safety
 * `clip` must be NULL or a live handle.
 */
double gk_clip_fps(const struct GkClip *clip);

/**
 * Derivative L1 loss between a reference and a predicted clip.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum GkStatus gk_eval_loss(const struct GkClip *reference,
                           const struct GkClip *predicted,
                           struct GkLossReport *out);

/**
 * Loads and validates a dictionary from its manifest path (or directory).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GkStatus gk_dictionary_load(const char *path, struct GkDictionary **out);

/**
 * # Safety
 * `dict` must be NULL or a handle from `gk_dictionary_load`, freed once.
 */
void gk_dictionary_free(struct GkDictionary *dict);

/**
 * # Safety
 * `dict` must be NULL or a live handle.
 */
size_t gk_dictionary_unit_count(const struct GkDictionary *dict);

/**
 * Builds a gesture script with the built-in lexicon. `timings_json` is a
 * word timing file (`{"words":[...]}`). Writes canonical script JSON.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_script` must be writable.
 */
enum GkStatus gk_parse_offline(const char *text, const char *timings_json, char **out_script);

/**
 * Synthesizes motion for a script. `options_json` may be NULL or an object
 * with `fps`, `ramp_s`, `mode`, `seed`, `min_gesture_s`, `apex_anchor` and
 * `base`. Each non-NULL output receives canonical JSON.
 *
 * # Safety
 * `dict` must be live, strings NUL-terminated, outputs NULL or writable.
 */
enum GkStatus gk_synthesize(const struct GkDictionary *dict,
                            const char *script_json,
                            const char *options_json,
                            char **out_motion,
                            char **out_schedule,
                            char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GESTUREKIT_H */
