#ifndef STCGAN_STCGAN_H
#define STCGAN_STCGAN_H

/* C interface to the shadow detection / removal library.
 *
 * Every call returns a status code. On failure the message is available from
 * stcgan_last_error() on the same thread until the next failing call there.
 * Strings returned through char** are owned by the caller and released with
 * stcgan_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define STCGAN_API __declspec(dllexport)
#else
#define STCGAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum stcgan_status {
  STCGAN_OK = 0,
  STCGAN_ERR_CONFIG = 1,  /* bad argument, key, value or topology mismatch */
  STCGAN_ERR_IO = 2,      /* unreadable or unwritable file, corrupt checkpoint */
  STCGAN_ERR_NUMERIC = 3  /* non-finite loss or gradient; failed gradient check */
} stcgan_status;

typedef struct stcgan_config stcgan_config;
typedef struct stcgan_model stcgan_model;

/* Receives one progress line (no trailing newline) during training. */
typedef void (*stcgan_progress_fn)(const char* line, void* user);

STCGAN_API const char* stcgan_version(void);
STCGAN_API const char* stcgan_last_error(void);
STCGAN_API void stcgan_string_free(char* s);

/* Run configuration: `key = value` settings with defaults for every key. */
STCGAN_API stcgan_status stcgan_config_create(stcgan_config** out);
STCGAN_API void stcgan_config_destroy(stcgan_config* cfg);
STCGAN_API stcgan_status stcgan_config_set(stcgan_config* cfg, const char* key, const char* value);
/* Allocates the current value of `key` into *value. */
STCGAN_API stcgan_status stcgan_config_get(const stcgan_config* cfg, const char* key, char** value);
/* Applies the keys found in a config file on top of the current values. */
STCGAN_API stcgan_status stcgan_config_load(stcgan_config* cfg, const char* path);
STCGAN_API stcgan_status stcgan_config_serialize(const stcgan_config* cfg, char** text);

/* Commands. Outputs go to the configured `out` directory. */
STCGAN_API stcgan_status stcgan_train(const stcgan_config* cfg, stcgan_progress_fn progress,
                                      void* user);
/* *report receives the human-readable table; eval.txt and eval.tsv are written too. */
STCGAN_API stcgan_status stcgan_eval(const stcgan_config* cfg, char** report);
/* Writes <stem>_mask.png and <stem>_shadow_free.png; *paths receives them, one per line. */
STCGAN_API stcgan_status stcgan_infer(const stcgan_config* cfg, const char* image_path,
                                      char** paths);
STCGAN_API stcgan_status stcgan_synth(const stcgan_config* cfg);
/* Runs the gradient check suite at the config's seed and precision
 * (f64_verify). Returns STCGAN_ERR_NUMERIC when any row fails; the report is
 * filled either way. inject_fault adds a deliberately wrong operator. */
STCGAN_API stcgan_status stcgan_gradcheck(const stcgan_config* cfg, int inject_fault,
                                          char** report);

/* Trained model for in-memory inference. */
STCGAN_API stcgan_status stcgan_model_load(const char* checkpoint_path, stcgan_model** out);
STCGAN_API void stcgan_model_destroy(stcgan_model* model);
/* Side length of the square images the model works at. */
STCGAN_API size_t stcgan_model_size(const stcgan_model* model);
/* Topology name, e.g. "full"; static storage. */
STCGAN_API const char* stcgan_model_variant(const stcgan_model* model);
/* Input: interleaved 8-bit RGB, any size (resized bilinearly). Outputs are
 * size*size gray and size*size*3 RGB buffers; either may be NULL, and the one
 * the topology cannot produce is left untouched with *has_mask / *has_image
 * set to 0. */
STCGAN_API stcgan_status stcgan_model_infer(stcgan_model* model, const uint8_t* rgb, size_t width,
                                            size_t height, uint8_t* mask_out, uint8_t* image_out,
                                            int* has_mask, int* has_image);

#ifdef __cplusplus
}
#endif

#endif
