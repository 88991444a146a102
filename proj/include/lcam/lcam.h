/*
 * L-CAM: learned class activation maps over a frozen CNN classifier.
 *
 * C interface to liblcam. Handles are opaque; every fallible call returns an
 * lcam_status and leaves a message retrievable with lcam_last_error() on the
 * calling thread. Strings returned through `char**` are owned by the caller
 * and released with lcam_string_free().
 */
#ifndef LCAM_LCAM_H
#define LCAM_LCAM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(LCAM_BUILDING_LIBRARY)
#    define LCAM_API __declspec(dllexport)
#  else
#    define LCAM_API __declspec(dllimport)
#  endif
#else
#  define LCAM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lcam_status {
  LCAM_OK = 0,
  LCAM_ERR_INVALID_ARGUMENT = 1,
  LCAM_ERR_NOT_FOUND = 2,
  LCAM_ERR_IO = 3,
  LCAM_ERR_CORRUPT = 4,
  LCAM_ERR_VERSION_MISMATCH = 5,
  LCAM_ERR_DIGEST_MISMATCH = 6,
  LCAM_ERR_DIVERGED = 7,
  LCAM_ERR_INTERNAL = 100
} lcam_status;

LCAM_API const char* lcam_version(void);
/* Message for the most recent failure on this thread ("" if none). */
LCAM_API const char* lcam_last_error(void);
LCAM_API const char* lcam_status_name(lcam_status status);
/* Non-zero for errors caused by the caller's input rather than by a bug. */
LCAM_API int lcam_status_is_user_error(lcam_status status);
LCAM_API void lcam_string_free(char* s);

/* ---- frozen classifier ------------------------------------------------ */

typedef struct lcam_model lcam_model;

typedef struct lcam_model_info {
  int num_classes;    /* R */
  int channels;       /* K */
  int feature_rows;   /* P */
  int feature_cols;   /* Q */
  int input_channels;
  int input_height;
  int input_width;
  char model_id[64];
  char split_point[32];
  char frozen_digest[65];
} lcam_model_info;

/* weights_path may be NULL: $LCAM_MODEL_CACHE/<model_id>.lcw is used.
 * split_point is "last_conv" or "after_last_maxpool" (NULL = last_conv). */
LCAM_API lcam_status lcam_model_open(const char* model_id, const char* weights_path,
                                     const char* split_point, lcam_model** out);
/* Randomly initialised backbone; for tests and smoke runs. */
LCAM_API lcam_status lcam_model_open_random(const char* model_id, const char* split_point,
                                            uint64_t seed, lcam_model** out);
LCAM_API void lcam_model_close(lcam_model* model);
LCAM_API lcam_status lcam_model_get_info(const lcam_model* model, lcam_model_info* out);
/* Feature-extraction passes performed so far through this handle. */
LCAM_API uint64_t lcam_model_pass_count(const lcam_model* model);
/* image: C x H x W doubles, already normalised. One pass. */
LCAM_API lcam_status lcam_model_truth(const lcam_model* model, const double* image, int channels,
                                      int height, int width, int* label, double* confidence);

/* ---- attention checkpoints -------------------------------------------- */

typedef struct lcam_checkpoint lcam_checkpoint;

/* With a model, refuses checkpoints trained on a different backbone. */
LCAM_API lcam_status lcam_checkpoint_load(const char* path, const lcam_model* model,
                                          lcam_checkpoint** out);
LCAM_API void lcam_checkpoint_free(lcam_checkpoint* ckpt);
/* JSON metadata (model id, split point, digest, training config, epoch). */
LCAM_API lcam_status lcam_checkpoint_describe(const lcam_checkpoint* ckpt, char** json);

/* Saliency map for a normalised image, written into out_map (height*width,
 * row-major). class_index < 0 selects the model-truth class. One pass. */
LCAM_API lcam_status lcam_explain_buffer(const lcam_model* model, const lcam_checkpoint* ckpt,
                                         const double* image, int channels, int height,
                                         int width, int class_index, double* out_map,
                                         int* out_class);

/* ---- commands ---------------------------------------------------------- */

typedef void (*lcam_log_fn)(const char* line, void* user);

typedef struct lcam_train_options {
  const char* data_dir;       /* required */
  const char* out_path;       /* checkpoint, rewritten after every epoch */
  const char* config_path;    /* optional key = value file */
  const char* weights_path;   /* optional, else model cache */
  const char* log_path;       /* optional CSV training log */
  const char* const* settings; /* "key=value" overrides, highest precedence */
  size_t settings_count;
  lcam_log_fn on_log_line;    /* optional */
  void* user;
} lcam_train_options;

typedef struct lcam_eval_options {
  const char* ckpt_path;      /* required */
  const char* data_dir;       /* required */
  const char* weights_path;   /* optional */
  const char* out_csv;        /* required; <stem>_records.csv is written beside it */
  const double* nu;           /* NULL = 100, 50, 15 */
  size_t nu_count;
  size_t sample_count;        /* default 2000 */
  uint64_t seed;
  int include_baselines;      /* add baseline_random and baseline_center rows */
} lcam_eval_options;

LCAM_API void lcam_train_options_init(lcam_train_options* o);
LCAM_API void lcam_eval_options_init(lcam_eval_options* o);

/* Each command writes its artefacts and returns a JSON summary. */
LCAM_API lcam_status lcam_train(const lcam_train_options* o, char** summary);
LCAM_API lcam_status lcam_explain_file(const char* ckpt_path, const char* weights_path,
                                       const char* image_path, int class_index,
                                       const char* out_dir, char** summary);
LCAM_API lcam_status lcam_evaluate(const lcam_eval_options* o, char** summary);
LCAM_API lcam_status lcam_report_errors(const char* ckpt_path, const char* weights_path,
                                        const char* data_dir, const char* out_dir,
                                        char** summary);
/* Synthetic 10-class dataset plus a fitted tiny CNN (tinycnn.lcw). */
LCAM_API lcam_status lcam_make_toy(const char* out_dir, int train_per_class, int test_per_class,
                                   uint64_t seed, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* LCAM_LCAM_H */
