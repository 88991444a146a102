#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "training/trainer.hpp"

namespace lcam {

// Flat key/value settings as read from a config file or collected from flags.
using Settings = std::map<std::string, std::string>;

struct RunConfig {
  std::string preset;
  std::string model_id;
  TrainConfig train;
};

std::vector<std::string> preset_names();
// vgg16-paper, resnet50-paper (full-scale recipes) and tinycnn-desk.
RunConfig preset(std::string_view name);

// "key = value" lines; '#' starts a comment; blank lines ignored.
Settings parse_settings(std::string_view text, const std::string& origin = "<config>");
Settings read_settings_file(const std::filesystem::path& path);

// Recognised keys: preset, model, variant, batch_size, lr, lr_decay_per_epoch,
// epochs, lambda1..lambda4, seed, split_point. Unknown keys are an error.
void apply_settings(RunConfig& cfg, const Settings& s);

// Preset (chosen by flags, else file, else vgg16-paper), then file, then flags.
RunConfig resolve_run_config(const Settings& file, const Settings& flags);

std::string format_settings(const RunConfig& cfg);

}  // namespace lcam
