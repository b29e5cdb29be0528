/* Copyright 2026 The dsr Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the dual-rate super-resolution library. All objects are
 * opaque handles owned by the caller and released with the matching _free
 * function. Every call returns a dsr_status; on failure the message is
 * available from dsr_last_error() on the same thread until the next call.
 */
#ifndef DSR_DSR_H_
#define DSR_DSR_H_

#include <stddef.h>
#include <stdint.h>

#if defined(DSR_BUILDING_LIBRARY)
#define DSR_API __attribute__((visibility("default")))
#else
#define DSR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 0-5 double as the command-line exit codes. */
typedef enum dsr_status {
  DSR_OK = 0,
  DSR_ERR_INTERNAL = 1,
  DSR_ERR_CONFIG = 2,     /* bad config document or argument value */
  DSR_ERR_IO = 3,         /* file system or format failure */
  DSR_ERR_DIVERGENCE = 4, /* non-finite training loss */
  DSR_ERR_GRADCHECK = 5,  /* gradient check above tolerance */
  DSR_ERR_ARGUMENT = 6    /* null handle, shape mismatch, buffer too small */
} dsr_status;

typedef struct dsr_tensor dsr_tensor;
typedef struct dsr_model dsr_model;

typedef void (*dsr_log_fn)(const char* message, void* user);

DSR_API const char* dsr_version(void);
DSR_API const char* dsr_last_error(void);
DSR_API const char* dsr_status_name(dsr_status status);

/* Diagnostics from long-running calls (training progress, summaries).
 * Process-wide; pass NULL to silence. */
DSR_API void dsr_set_log_callback(dsr_log_fn fn, void* user);

/* Tensors: height x width x channels doubles, row-major, channel fastest. */
DSR_API dsr_status dsr_tensor_create(int height, int width, int channels, const double* data,
                                     dsr_tensor** out);
DSR_API void dsr_tensor_free(dsr_tensor* t);
DSR_API dsr_status dsr_tensor_shape(const dsr_tensor* t, int* height, int* width, int* channels);
/* Copies the samples into buf, which must hold at least h*w*c values. */
DSR_API dsr_status dsr_tensor_copy_data(const dsr_tensor* t, double* buf, size_t capacity);
/* .pfm or .png by extension. */
DSR_API dsr_status dsr_tensor_read(const char* path, dsr_tensor** out);
DSR_API dsr_status dsr_tensor_write(const dsr_tensor* t, const char* path);
DSR_API dsr_status dsr_bicubic_upscale(const dsr_tensor* t, int factor, dsr_tensor** out);

/* Models: topology plus parameters. topology_json may be NULL for the
 * default desk-scale topology at upscale r. */
DSR_API dsr_status dsr_model_create(const char* topology_json, int r, uint64_t seed,
                                    int zero_init, dsr_model** out);
DSR_API dsr_status dsr_model_load(const char* checkpoint_path, dsr_model** out);
DSR_API dsr_status dsr_model_save(const dsr_model* m, const char* checkpoint_path);
DSR_API void dsr_model_free(dsr_model* m);
DSR_API dsr_status dsr_model_param_counts(const dsr_model* m, uint64_t* pixel_flow,
                                          uint64_t* control_flow);
/* Upscale factor R of the model, or 0 for a null handle. */
DSR_API int dsr_model_upscale(const dsr_model* m);
/* Both flows on one frame (1 or 3 channels). prefs may be NULL (all 0.5). */
DSR_API dsr_status dsr_model_forward(const dsr_model* m, const dsr_tensor* frame,
                                     const double* prefs, size_t n_prefs, dsr_tensor** out);

/* Runs a subcommand ("datagen", "train", "infer", "count-ops", "grad-check",
 * "psf-preview") on a JSON config document. *report_json receives a JSON
 * object (also on failure, with an "error" member) to be released with
 * dsr_string_free. The object carries "artifacts" (written paths) and, for
 * count-ops, "table". */
DSR_API dsr_status dsr_run_command(const char* name, const char* config_json,
                                   char** report_json);
DSR_API void dsr_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* DSR_DSR_H_ */
