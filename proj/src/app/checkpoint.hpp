#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "backbone/backbone.hpp"
#include "training/trainer.hpp"

namespace lcam {

inline constexpr int kCheckpointFormat = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Structural load: archive integrity, format version and parameter shapes.
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also refuses checkpoints trained against a different backbone.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ClassifierSplit& split);

// Weight file for a backbone: the explicit path if given, otherwise
// $LCAM_MODEL_CACHE/<model_id>.lcw (default ~/.cache/lcam).
std::filesystem::path model_cache_dir();
std::filesystem::path resolve_weights(const std::string& model_id,
                                      const std::optional<std::filesystem::path>& explicit_path);

}  // namespace lcam
