// lcam command-line tool. Talks to liblcam exclusively through the C API.
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcam/lcam.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

const char* c_str_or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int finish(lcam_status st, char* const& summary, bool quiet) {
  if (st != LCAM_OK) {
    std::fprintf(stderr, "lcam: error (%s): %s\n", lcam_status_name(st), lcam_last_error());
    return lcam_status_is_user_error(st) ? kExitUser : kExitInternal;
  }
  if (summary && !quiet) std::printf("%s\n", summary);
  lcam_string_free(summary);
  return kExitOk;
}

std::vector<double> parse_nu_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument(item);
    out.push_back(v);
  }
  return out;
}

void print_log_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"L-CAM: learned class activation maps for frozen CNN classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lcam_version()));
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress the JSON summary on stdout");

  // train
  auto* train = app.add_subcommand("train", "Train the attention head on a frozen backbone");
  std::string t_data, t_out, t_config, t_weights, t_log;
  std::vector<std::string> t_set;
  bool t_progress = false;
  train->add_option("--data", t_data, "Training images (class directories or flat)")->required();
  train->add_option("--out", t_out, "Checkpoint path")->required();
  train->add_option("--config", t_config, "key = value config file");
  train->add_option("--weights", t_weights, "Backbone weight file (default: model cache)");
  train->add_option("--log", t_log, "Write the per-step loss log (CSV)");
  train->add_option("--set", t_set, "Extra key=value setting (repeatable)");
  train->add_flag("--progress", t_progress, "Echo the loss log to stderr");
  const std::vector<std::pair<std::string, std::string>> keyed = {
      {"--preset", "preset"},       {"--model,--backbone", "model"},
      {"--variant", "variant"},     {"--batch-size", "batch_size"},
      {"--lr", "lr"},               {"--lr-decay", "lr_decay_per_epoch"},
      {"--epochs", "epochs"},       {"--lambda1", "lambda1"},
      {"--lambda2", "lambda2"},     {"--lambda3", "lambda3"},
      {"--lambda4", "lambda4"},     {"--seed", "seed"},
      {"--split,--split-point", "split_point"}};
  std::map<std::string, std::string> t_values;
  for (const auto& [flag, key] : keyed) train->add_option(flag, t_values[key], "Sets '" + key + "'");

  // explain
  auto* explain = app.add_subcommand("explain", "Saliency map for one image");
  std::string e_ckpt, e_image, e_out, e_weights;
  int e_class = -1;
  explain->add_option("--ckpt", e_ckpt, "Checkpoint")->required();
  explain->add_option("--image", e_image, "Input image")->required();
  explain->add_option("--out", e_out, "Output directory")->required();
  explain->add_option("--class", e_class, "Class index (default: model-truth label)");
  explain->add_option("--weights", e_weights, "Backbone weight file (default: model cache)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Average Drop / Increase in Confidence");
  std::string v_ckpt, v_data, v_out, v_weights, v_nu = "100,50,15";
  std::size_t v_sample = 2000;
  std::uint64_t v_seed = 0;
  bool v_baselines = false;
  evaluate->add_option("--ckpt", v_ckpt, "Checkpoint")->required();
  evaluate->add_option("--data", v_data, "Test images")->required();
  evaluate->add_option("--out", v_out, "Report CSV")->required();
  evaluate->add_option("--nu", v_nu, "Comma-separated percentages of kept pixels");
  evaluate->add_option("--sample", v_sample, "Number of test images")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", v_seed, "Subset selection seed");
  evaluate->add_option("--weights", v_weights, "Backbone weight file (default: model cache)");
  evaluate->add_flag("--baselines", v_baselines, "Add baseline_random and baseline_center rows");

  // report-errors
  auto* report = app.add_subcommand("report-errors", "Overlays for misclassified images");
  std::string r_ckpt, r_data, r_out, r_weights;
  report->add_option("--ckpt", r_ckpt, "Checkpoint")->required();
  report->add_option("--data", r_data, "Images in class directories")->required();
  report->add_option("--out", r_out, "Report directory")->required();
  report->add_option("--weights", r_weights, "Backbone weight file (default: model cache)");

  // make-toy
  auto* toy = app.add_subcommand("make-toy", "Synthetic dataset and a fitted tiny CNN");
  std::string m_out;
  int m_train = 100, m_test = 20;
  std::uint64_t m_seed = 0;
  toy->add_option("--out", m_out, "Output directory")->required();
  toy->add_option("--train-per-class", m_train, "Training images per class");
  toy->add_option("--test-per-class", m_test, "Test images per class");
  toy->add_option("--seed", m_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  char* summary = nullptr;
  if (*train) {
    std::vector<std::string> settings = t_set;
    for (const auto& [key, value] : t_values)
      if (!value.empty()) settings.push_back(key + "=" + value);
    std::vector<const char*> ptrs;
    for (const auto& s : settings) ptrs.push_back(s.c_str());
    lcam_train_options o;
    lcam_train_options_init(&o);
    o.data_dir = t_data.c_str();
    o.out_path = t_out.c_str();
    o.config_path = c_str_or_null(t_config);
    o.weights_path = c_str_or_null(t_weights);
    o.log_path = c_str_or_null(t_log);
    o.settings = ptrs.data();
    o.settings_count = ptrs.size();
    if (t_progress) o.on_log_line = print_log_line;
    return finish(lcam_train(&o, &summary), summary, quiet);
  }
  if (*explain) {
    return finish(lcam_explain_file(e_ckpt.c_str(), c_str_or_null(e_weights), e_image.c_str(),
                                    e_class, e_out.c_str(), &summary),
                  summary, quiet);
  }
  if (*evaluate) {
    std::vector<double> nu;
    try {
      nu = parse_nu_list(v_nu);
    } catch (const std::exception&) {
      std::fprintf(stderr, "lcam: error: --nu expects numbers like 100,50,15\n");
      return kExitUser;
    }
    lcam_eval_options o;
    lcam_eval_options_init(&o);
    o.ckpt_path = v_ckpt.c_str();
    o.data_dir = v_data.c_str();
    o.weights_path = c_str_or_null(v_weights);
    o.out_csv = v_out.c_str();
    o.nu = nu.data();
    o.nu_count = nu.size();
    o.sample_count = v_sample;
    o.seed = v_seed;
    o.include_baselines = v_baselines ? 1 : 0;
    return finish(lcam_evaluate(&o, &summary), summary, quiet);
  }
  if (*report) {
    return finish(lcam_report_errors(r_ckpt.c_str(), c_str_or_null(r_weights), r_data.c_str(),
                                     r_out.c_str(), &summary),
                  summary, quiet);
  }
  if (*toy) {
    return finish(lcam_make_toy(m_out.c_str(), m_train, m_test, m_seed, &summary), summary, quiet);
  }
  return kExitUser;
}
