/* Exercises the public C interface from plain C. */
#define _POSIX_C_SOURCE 200809L
#include <lcam/lcam.h>

#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/stat.h>

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

#define EXPECT_STATUS(call, want)                                            \
  do {                                                                       \
    lcam_status got_ = (call);                                               \
    if (got_ != (want)) {                                                    \
      fprintf(stderr, "%s:%d: %s returned %s (%s)\n", __FILE__, __LINE__,    \
              #call, lcam_status_name(got_), lcam_last_error());             \
      ++failures;                                                            \
    }                                                                        \
  } while (0)

static int exists(const char* path) {
  struct stat st;
  return stat(path, &st) == 0;
}

static char* join(const char* dir, const char* name) {
  size_t n = strlen(dir) + strlen(name) + 2;
  char* s = malloc(n);
  snprintf(s, n, "%s/%s", dir, name);
  return s;
}

static int log_lines = 0;
static void count_line(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

int main(void) {
  char tmpl[] = "/tmp/lcam-capi-XXXXXX";
  const char* dir = mkdtemp(tmpl);
  if (!dir) return 2;

  EXPECT(strlen(lcam_version()) > 0);
  EXPECT(strcmp(lcam_status_name(LCAM_ERR_DIGEST_MISMATCH), "digest_mismatch") == 0);
  EXPECT(lcam_status_is_user_error(LCAM_ERR_NOT_FOUND));
  EXPECT(!lcam_status_is_user_error(LCAM_ERR_INTERNAL));
  EXPECT(!lcam_status_is_user_error(LCAM_OK));

  char* summary = NULL;
  EXPECT_STATUS(lcam_make_toy(dir, 8, 2, 3, &summary), LCAM_OK);
  EXPECT(summary && strstr(summary, "train_accuracy"));
  lcam_string_free(summary);

  char* weights = join(dir, "tinycnn.lcw");
  char* train_dir = join(dir, "train");
  char* test_dir = join(dir, "test");
  char* ckpt = join(dir, "head.lcam");
  char* log = join(dir, "train_log.csv");

  lcam_train_options to;
  lcam_train_options_init(&to);
  const char* settings[] = {"preset=tinycnn-desk", "epochs=1", "seed=4"};
  to.data_dir = train_dir;
  to.out_path = ckpt;
  to.weights_path = weights;
  to.log_path = log;
  to.settings = settings;
  to.settings_count = 3;
  to.on_log_line = count_line;
  to.user = &log_lines;
  summary = NULL;
  EXPECT_STATUS(lcam_train(&to, &summary), LCAM_OK);
  EXPECT(summary && strstr(summary, "\"backbone_unchanged\": true"));
  lcam_string_free(summary);
  EXPECT(exists(ckpt));
  EXPECT(exists(log));
  /* header plus ceil(80 / 16) steps */
  EXPECT(log_lines == 6);

  /* in-memory explanation: exactly one feature pass */
  lcam_model* model = NULL;
  EXPECT_STATUS(lcam_model_open("tinycnn", weights, NULL, &model), LCAM_OK);
  lcam_model_info info;
  EXPECT_STATUS(lcam_model_get_info(model, &info), LCAM_OK);
  EXPECT(info.num_classes == 10);
  EXPECT(strcmp(info.model_id, "tinycnn") == 0);
  EXPECT(strcmp(info.split_point, "last_conv") == 0);
  EXPECT(strlen(info.frozen_digest) == 64);

  lcam_checkpoint* head = NULL;
  EXPECT_STATUS(lcam_checkpoint_load(ckpt, model, &head), LCAM_OK);
  char* meta = NULL;
  EXPECT_STATUS(lcam_checkpoint_describe(head, &meta), LCAM_OK);
  EXPECT(meta && strstr(meta, info.frozen_digest));
  lcam_string_free(meta);

  size_t plane = (size_t)info.input_height * (size_t)info.input_width;
  double* image = calloc(plane * (size_t)info.input_channels, sizeof(double));
  double* map = calloc(plane, sizeof(double));
  for (size_t i = 0; i < plane * (size_t)info.input_channels; ++i) image[i] = (double)(i % 7) / 7.0 - 0.4;
  int label = -1, cls = -1;
  double conf = 0.0;
  EXPECT_STATUS(lcam_model_truth(model, image, info.input_channels, info.input_height,
                                 info.input_width, &label, &conf),
                LCAM_OK);
  EXPECT(label >= 0 && label < 10);
  EXPECT(conf > 0.0 && conf <= 1.0);
  uint64_t before = lcam_model_pass_count(model);
  EXPECT_STATUS(lcam_explain_buffer(model, head, image, info.input_channels, info.input_height,
                                    info.input_width, -1, map, &cls),
                LCAM_OK);
  EXPECT(lcam_model_pass_count(model) - before == 1);
  EXPECT(cls == label);
  double lo = 1.0, hi = 0.0;
  for (size_t i = 0; i < plane; ++i) {
    if (map[i] < lo) lo = map[i];
    if (map[i] > hi) hi = map[i];
  }
  EXPECT(lo >= 0.0 && hi <= 1.0);
  EXPECT_STATUS(lcam_explain_buffer(model, head, image, info.input_channels, info.input_height,
                                    info.input_width, 10, map, &cls),
                LCAM_ERR_INVALID_ARGUMENT);
  EXPECT_STATUS(lcam_explain_buffer(model, head, image, info.input_channels, info.input_height + 1,
                                    info.input_width, 0, map, &cls),
                LCAM_ERR_INVALID_ARGUMENT);
  EXPECT(strlen(lcam_last_error()) > 0);

  /* checkpoint bound to a different backbone */
  lcam_model* other = NULL;
  lcam_checkpoint* refused = NULL;
  EXPECT_STATUS(lcam_model_open_random("tinycnn", NULL, 9, &other), LCAM_OK);
  EXPECT_STATUS(lcam_checkpoint_load(ckpt, other, &refused), LCAM_ERR_DIGEST_MISMATCH);
  EXPECT(refused == NULL);
  lcam_model_close(other);

  /* file-level commands */
  char* img = join(test_dir, "class_03/img_0001.png");
  char* explain_dir = join(dir, "explain");
  summary = NULL;
  EXPECT_STATUS(lcam_explain_file(ckpt, weights, img, -1, explain_dir, &summary), LCAM_OK);
  EXPECT(summary && strstr(summary, "\"passes\": 1"));
  lcam_string_free(summary);
  char* sm_png = join(explain_dir, "img_0001_sm.png");
  char* sm_npy = join(explain_dir, "img_0001_sm.npy");
  char* sm_json = join(explain_dir, "img_0001_sm.json");
  EXPECT(exists(sm_png) && exists(sm_npy) && exists(sm_json));

  lcam_eval_options eo;
  lcam_eval_options_init(&eo);
  EXPECT(eo.sample_count == 2000);
  char* csv = join(dir, "report.csv");
  char* records = join(dir, "report_records.csv");
  eo.ckpt_path = ckpt;
  eo.data_dir = test_dir;
  eo.weights_path = weights;
  eo.out_csv = csv;
  eo.sample_count = 10;
  eo.include_baselines = 1;
  summary = NULL;
  EXPECT_STATUS(lcam_evaluate(&eo, &summary), LCAM_OK);
  lcam_string_free(summary);
  EXPECT(exists(csv) && exists(records));

  char* errors_dir = join(dir, "errors");
  char* index = join(errors_dir, "index.json");
  summary = NULL;
  EXPECT_STATUS(lcam_report_errors(ckpt, weights, test_dir, errors_dir, &summary), LCAM_OK);
  lcam_string_free(summary);
  EXPECT(exists(index));

  /* user errors */
  char* missing = join(dir, "missing.lcam");
  EXPECT_STATUS(lcam_explain_file(missing, weights, img, -1, explain_dir, NULL), LCAM_ERR_NOT_FOUND);
  lcam_eval_options bad = eo;
  bad.data_dir = NULL;
  EXPECT_STATUS(lcam_evaluate(&bad, NULL), LCAM_ERR_INVALID_ARGUMENT);
  const char* unknown[] = {"preset=tinycnn-desk", "colour=red"};
  to.settings = unknown;
  to.settings_count = 2;
  EXPECT_STATUS(lcam_train(&to, NULL), LCAM_ERR_INVALID_ARGUMENT);
  EXPECT_STATUS(lcam_model_open("tinycnn", missing, NULL, &other), LCAM_ERR_NOT_FOUND);

  lcam_checkpoint_free(head);
  lcam_model_close(model);
  free(image);
  free(map);
  free(weights), free(train_dir), free(test_dir), free(ckpt), free(log), free(img);
  free(explain_dir), free(sm_png), free(sm_npy), free(sm_json), free(csv), free(records);
  free(errors_dir), free(index), free(missing);

  char cmd[256];
  snprintf(cmd, sizeof cmd, "rm -rf '%s'", dir);
  if (system(cmd) != 0) fprintf(stderr, "could not remove %s\n", dir);

  if (failures) fprintf(stderr, "%d C API check(s) failed\n", failures);
  else printf("C API checks passed\n");
  return failures ? 1 : 0;
}
