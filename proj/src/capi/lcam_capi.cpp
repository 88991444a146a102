#include "lcam/lcam.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include <json.hpp>

#include "app/checkpoint.hpp"
#include "app/config.hpp"
#include "app/dataset.hpp"
#include "app/report.hpp"
#include "core/archive.hpp"
#include "evaluation/evaluation.hpp"
#include "inference/inference.hpp"
#include "toy/toy.hpp"
#include "training/preprocess.hpp"
#include "training/trainer.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

struct lcam_model {
  std::unique_ptr<lcam::ClassifierSplit> split;
};

struct lcam_checkpoint {
  lcam::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

lcam_status to_status(lcam::Errc code) {
  switch (code) {
    case lcam::Errc::invalid_argument: return LCAM_ERR_INVALID_ARGUMENT;
    case lcam::Errc::not_found: return LCAM_ERR_NOT_FOUND;
    case lcam::Errc::io: return LCAM_ERR_IO;
    case lcam::Errc::corrupt: return LCAM_ERR_CORRUPT;
    case lcam::Errc::version_mismatch: return LCAM_ERR_VERSION_MISMATCH;
    case lcam::Errc::digest_mismatch: return LCAM_ERR_DIGEST_MISMATCH;
    case lcam::Errc::diverged: return LCAM_ERR_DIVERGED;
  }
  return LCAM_ERR_INTERNAL;
}

template <typename F>
lcam_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return LCAM_OK;
  } catch (const lcam::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return LCAM_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LCAM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return LCAM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error: unknown exception";
    return LCAM_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw lcam::Error(lcam::Errc::invalid_argument, what);
}

std::optional<fs::path> opt_path(const char* p) {
  if (p && *p) return fs::path(p);
  return std::nullopt;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** summary, const json& j) {
  if (summary) *summary = dup_string(j.dump(2));
}

void copy_field(char* dst, std::size_t cap, const std::string& src) {
  std::snprintf(dst, cap, "%s", src.c_str());
}

lcam::Image image_from_buffer(const double* data, int c, int h, int w) {
  require(data != nullptr, "image buffer is NULL");
  require(c > 0 && h > 0 && w > 0, "image dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(c) * h * w;
  return lcam::Image(lcam::Tensor({c, h, w}, std::vector<double>(data, data + n)));
}

struct BoundCheckpoint {
  lcam::Checkpoint ckpt;
  std::unique_ptr<lcam::ClassifierSplit> split;
};

// Loads a checkpoint together with the backbone it was trained on.
BoundCheckpoint open_bound(const char* ckpt_path, const char* weights_path) {
  require(ckpt_path && *ckpt_path, "checkpoint path is required");
  BoundCheckpoint b;
  b.ckpt = lcam::load_checkpoint(ckpt_path);
  const fs::path w = lcam::resolve_weights(b.ckpt.model_id, opt_path(weights_path));
  b.split = lcam::split_classifier(b.ckpt.model_id, b.ckpt.config.split_point, lcam::WeightFile{w});
  lcam::verify_binding(*b.split, b.ckpt);
  return b;
}

// L-CAM-Fm / L-CAM-Img, starred when trained with CE only.
std::string method_label(const lcam::TrainConfig& cfg) {
  std::string s = cfg.variant == lcam::Variant::fm ? "L-CAM-Fm" : "L-CAM-Img";
  if (cfg.loss_weights.lambda1 == 0.0 && cfg.loss_weights.lambda2 == 0.0) s += "*";
  return s;
}

json loss_json(const lcam::LossBreakdown& l) {
  return {{"tv", l.tv}, {"av", l.av}, {"ce", l.ce}, {"total", l.total}};
}

}  // namespace

extern "C" {

const char* lcam_version(void) { return "1.0.0"; }

const char* lcam_last_error(void) { return g_last_error.c_str(); }

const char* lcam_status_name(lcam_status status) {
  switch (status) {
    case LCAM_OK: return "ok";
    case LCAM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case LCAM_ERR_NOT_FOUND: return "not_found";
    case LCAM_ERR_IO: return "io";
    case LCAM_ERR_CORRUPT: return "corrupt";
    case LCAM_ERR_VERSION_MISMATCH: return "version_mismatch";
    case LCAM_ERR_DIGEST_MISMATCH: return "digest_mismatch";
    case LCAM_ERR_DIVERGED: return "diverged";
    case LCAM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int lcam_status_is_user_error(lcam_status status) {
  return status != LCAM_OK && status != LCAM_ERR_INTERNAL;
}

void lcam_string_free(char* s) { std::free(s); }

lcam_status lcam_model_open(const char* model_id, const char* weights_path,
                            const char* split_point, lcam_model** out) {
  return guarded([&] {
    require(model_id && out, "model_id and out are required");
    *out = nullptr;
    const auto sp = split_point ? lcam::parse_split_point(split_point) : lcam::SplitPoint::last_conv;
    const fs::path w = lcam::resolve_weights(model_id, opt_path(weights_path));
    auto m = std::make_unique<lcam_model>();
    m->split = lcam::split_classifier(model_id, sp, lcam::WeightFile{w});
    *out = m.release();
  });
}

lcam_status lcam_model_open_random(const char* model_id, const char* split_point, uint64_t seed,
                                   lcam_model** out) {
  return guarded([&] {
    require(model_id && out, "model_id and out are required");
    *out = nullptr;
    const auto sp = split_point ? lcam::parse_split_point(split_point) : lcam::SplitPoint::last_conv;
    auto m = std::make_unique<lcam_model>();
    m->split = lcam::split_classifier(model_id, sp, lcam::RandomWeights{seed});
    *out = m.release();
  });
}

void lcam_model_close(lcam_model* model) { delete model; }

lcam_status lcam_model_get_info(const lcam_model* model, lcam_model_info* out) {
  return guarded([&] {
    require(model && out, "model and out are required");
    const auto& s = *model->split;
    *out = lcam_model_info{};
    out->num_classes = s.num_classes();
    out->channels = s.feature_shape()[0];
    out->feature_rows = s.feature_shape()[1];
    out->feature_cols = s.feature_shape()[2];
    out->input_channels = s.input_shape()[0];
    out->input_height = s.input_shape()[1];
    out->input_width = s.input_shape()[2];
    copy_field(out->model_id, sizeof(out->model_id), s.model_id());
    copy_field(out->split_point, sizeof(out->split_point), lcam::to_string(s.split_point()));
    copy_field(out->frozen_digest, sizeof(out->frozen_digest), s.frozen_digest());
  });
}

uint64_t lcam_model_pass_count(const lcam_model* model) {
  return model ? model->split->pass_count() : 0;
}

lcam_status lcam_model_truth(const lcam_model* model, const double* image, int channels,
                             int height, int width, int* label, double* confidence) {
  return guarded([&] {
    require(model != nullptr, "model is NULL");
    const auto mt =
        lcam::model_truth_label(*model->split, image_from_buffer(image, channels, height, width));
    if (label) *label = mt.label;
    if (confidence) *confidence = mt.confidence;
  });
}

lcam_status lcam_checkpoint_load(const char* path, const lcam_model* model, lcam_checkpoint** out) {
  return guarded([&] {
    require(path && out, "path and out are required");
    *out = nullptr;
    auto c = std::make_unique<lcam_checkpoint>();
    c->ckpt = model ? lcam::load_checkpoint(path, *model->split) : lcam::load_checkpoint(path);
    *out = c.release();
  });
}

void lcam_checkpoint_free(lcam_checkpoint* ckpt) { delete ckpt; }

lcam_status lcam_checkpoint_describe(const lcam_checkpoint* ckpt, char** out) {
  return guarded([&] {
    require(ckpt && out, "checkpoint and out are required");
    const auto& c = ckpt->ckpt;
    emit(out, {{"model_id", c.model_id},
               {"split_point", lcam::to_string(c.config.split_point)},
               {"frozen_digest", c.frozen_digest},
               {"epoch", c.epoch},
               {"log_digest", c.log_digest},
               {"num_classes", c.params.num_classes},
               {"channels", c.params.channels},
               {"method", method_label(c.config)},
               {"train_config", c.config.to_json()}});
  });
}

lcam_status lcam_explain_buffer(const lcam_model* model, const lcam_checkpoint* ckpt,
                                const double* image, int channels, int height, int width,
                                int class_index, double* out_map, int* out_class) {
  return guarded([&] {
    require(model && ckpt && out_map, "model, checkpoint and out_map are required");
    lcam::verify_binding(*model->split, ckpt->ckpt);
    const auto x = image_from_buffer(image, channels, height, width);
    const std::optional<int> y = class_index < 0 ? std::nullopt : std::optional<int>(class_index);
    const auto v = lcam::explain(*model->split, ckpt->ckpt.params, x, y);
    std::memcpy(out_map, v.values.values.data(), v.values.size() * sizeof(double));
    if (out_class) *out_class = v.class_index;
  });
}

void lcam_train_options_init(lcam_train_options* o) {
  if (o) *o = lcam_train_options{};
}

void lcam_eval_options_init(lcam_eval_options* o) {
  if (!o) return;
  *o = lcam_eval_options{};
  o->sample_count = 2000;
}

lcam_status lcam_train(const lcam_train_options* o, char** summary) {
  return guarded([&] {
    require(o != nullptr, "options are NULL");
    require(o->data_dir && *o->data_dir, "data directory is required");
    require(o->out_path && *o->out_path, "checkpoint output path is required");

    lcam::Settings file;
    if (o->config_path && *o->config_path) file = lcam::read_settings_file(o->config_path);
    std::string flag_text;
    for (std::size_t i = 0; i < o->settings_count; ++i) {
      require(o->settings[i] != nullptr, "NULL setting");
      flag_text += o->settings[i];
      flag_text += '\n';
    }
    const lcam::Settings flags = lcam::parse_settings(flag_text, "<flags>");
    const lcam::RunConfig rc = lcam::resolve_run_config(file, flags);

    const fs::path weights = lcam::resolve_weights(rc.model_id, opt_path(o->weights_path));
    const auto split =
        lcam::split_classifier(rc.model_id, rc.train.split_point, lcam::WeightFile{weights});
    const auto manifest = lcam::ingest_dataset(o->data_dir);
    const lcam::ManifestImages images(manifest);

    const fs::path out_path = o->out_path;
    std::string log;
    lcam::TrainHooks hooks;
    hooks.on_epoch_end = [&](const lcam::Checkpoint& c) { lcam::save_checkpoint(out_path, c); };
    hooks.on_log_line = [&](const std::string& line) {
      log += line;
      log += '\n';
      if (o->on_log_line) o->on_log_line(line.c_str(), o->user);
    };
    auto flush_log = [&] {
      if (o->log_path && *o->log_path) lcam::write_text_atomic(o->log_path, log);
    };

    lcam::TrainResult result;
    try {
      result = lcam::train(*split, images, rc.train, hooks);
    } catch (...) {
      flush_log();
      throw;
    }
    flush_log();
    lcam::save_checkpoint(out_path, result.checkpoint);

    json epochs = json::array();
    for (const auto& e : result.epoch_means) epochs.push_back(loss_json(e));
    emit(summary, {{"command", "train"},
                   {"checkpoint", out_path.generic_string()},
                   {"method", method_label(rc.train)},
                   {"preset", rc.preset},
                   {"model_id", rc.model_id},
                   {"config", rc.train.to_json()},
                   {"images", manifest.entries.size()},
                   {"skipped", manifest.skipped.size()},
                   {"steps", result.steps.size()},
                   {"epoch_means", epochs},
                   {"frozen_digest", split->frozen_digest()},
                   {"backbone_unchanged", split->current_digest() == split->frozen_digest()}});
  });
}

lcam_status lcam_explain_file(const char* ckpt_path, const char* weights_path,
                              const char* image_path, int class_index, const char* out_dir,
                              char** summary) {
  return guarded([&] {
    require(image_path && *image_path, "image path is required");
    require(out_dir && *out_dir, "output directory is required");
    const BoundCheckpoint b = open_bound(ckpt_path, weights_path);
    const auto p = lcam::preprocess_eval(fs::path(image_path), b.split->preprocess());
    const std::optional<int> y = class_index < 0 ? std::nullopt : std::optional<int>(class_index);

    const std::uint64_t before = b.split->pass_count();
    lcam::ClassScores scores;
    const lcam::SaliencyMap v = lcam::explain(*b.split, b.ckpt.params, p.image, y, &scores);
    const std::uint64_t passes = b.split->pass_count() - before;

    const std::string stem = fs::path(image_path).stem().string() + "_sm";
    const auto files = lcam::export_overlay(p.view, v, out_dir, stem);
    const json record{{"image", fs::path(image_path).generic_string()},
                      {"method", method_label(b.ckpt.config)},
                      {"class_index", v.class_index},
                      {"confidence", scores.probs.at(v.class_index)},
                      {"model_truth", scores.argmax()},
                      {"passes", passes},
                      {"overlay", files.png.filename().string()},
                      {"saliency", files.npy.filename().string()},
                      {"width", v.values.cols},
                      {"height", v.values.rows}};
    lcam::write_text_atomic(fs::path(out_dir) / (stem + ".json"), record.dump(2) + "\n");
    emit(summary, record);
  });
}

lcam_status lcam_evaluate(const lcam_eval_options* o, char** summary) {
  return guarded([&] {
    require(o != nullptr, "options are NULL");
    require(o->data_dir && *o->data_dir, "data directory is required");
    require(o->out_csv && *o->out_csv, "output CSV path is required");
    const BoundCheckpoint b = open_bound(o->ckpt_path, o->weights_path);
    const auto manifest = lcam::ingest_dataset(o->data_dir);
    const lcam::ManifestImages images(manifest);

    lcam::EvalConfig cfg;
    if (o->nu && o->nu_count > 0) cfg.nu_list.assign(o->nu, o->nu + o->nu_count);
    cfg.sample_count = o->sample_count;
    cfg.seed = o->seed;
    cfg.method_id = method_label(b.ckpt.config);
    cfg.validate();

    std::vector<lcam::EvalReport> reports;
    const lcam::LcamExplainer lcam_explainer(*b.split, b.ckpt, cfg.method_id);
    reports.push_back(lcam::evaluate(*b.split, lcam_explainer, images, cfg));
    if (o->include_baselines) {
      const lcam::RandomBaseline random(o->seed);
      const lcam::CenterBaseline center;
      for (const lcam::Explainer* e : {static_cast<const lcam::Explainer*>(&random),
                                       static_cast<const lcam::Explainer*>(&center)}) {
        lcam::EvalConfig c = cfg;
        c.method_id = e->method_id();
        reports.push_back(lcam::evaluate(*b.split, *e, images, c));
      }
    }

    const fs::path csv = o->out_csv;
    fs::path records = csv;
    records.replace_filename(csv.stem().string() + "_records.csv");
    lcam::write_text_atomic(csv, lcam::report_csv(reports));
    std::string rec_text;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      std::string part = lcam::records_csv(reports[i]);
      if (i > 0) part.erase(0, part.find('\n') + 1);
      rec_text += part;
    }
    lcam::write_text_atomic(records, rec_text);

    json methods = json::array();
    for (const auto& r : reports) {
      json per_nu = json::array();
      for (const auto& n : r.per_nu)
        per_nu.push_back({{"nu", n.nu}, {"AD", n.ad}, {"IC", n.ic},
                          {"zero_orig_excluded", n.zero_orig_excluded}});
      const double per_image =
          r.records.empty() ? 0.0 : static_cast<double>(r.total_passes) / r.records.size();
      methods.push_back({{"method", r.method_id},
                         {"fw", r.explainer_passes},
                         {"images", r.records.size()},
                         {"total_passes", r.total_passes},
                         {"passes_per_image", per_image},
                         {"results", per_nu}});
    }
    emit(summary, {{"command", "evaluate"},
                   {"csv", csv.generic_string()},
                   {"records", records.generic_string()},
                   {"sample_count", cfg.sample_count},
                   {"seed", cfg.seed},
                   {"skipped", manifest.skipped.size()},
                   {"methods", methods}});
  });
}

lcam_status lcam_report_errors(const char* ckpt_path, const char* weights_path,
                               const char* data_dir, const char* out_dir, char** summary) {
  return guarded([&] {
    require(data_dir && *data_dir, "data directory is required");
    require(out_dir && *out_dir, "output directory is required");
    const BoundCheckpoint b = open_bound(ckpt_path, weights_path);
    const auto manifest = lcam::ingest_dataset(data_dir, lcam::DatasetLayout::per_class);
    const lcam::LcamExplainer explainer(*b.split, b.ckpt, method_label(b.ckpt.config));
    const auto errors = lcam::report_misclassifications(*b.split, explainer, manifest, out_dir);
    emit(summary, {{"command", "report-errors"},
                   {"images", manifest.entries.size()},
                   {"misclassified", errors.size()},
                   {"index", (fs::path(out_dir) / "index.json").generic_string()}});
  });
}

lcam_status lcam_make_toy(const char* out_dir, int train_per_class, int test_per_class,
                          uint64_t seed, char** summary) {
  return guarded([&] {
    require(out_dir && *out_dir, "output directory is required");
    require(train_per_class > 0 && test_per_class > 0, "per-class counts must be positive");
    const auto a = lcam::toy::make_toy(out_dir, train_per_class, test_per_class, seed);
    emit(summary, {{"command", "make-toy"},
                   {"train_dir", a.train_dir.generic_string()},
                   {"test_dir", a.test_dir.generic_string()},
                   {"weights", a.weights.generic_string()},
                   {"train_accuracy", a.train_accuracy},
                   {"test_accuracy", a.test_accuracy}});
  });
}

}  // extern "C"
