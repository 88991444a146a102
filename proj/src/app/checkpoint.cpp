#include "app/checkpoint.hpp"

#include <cstdlib>

#include "core/archive.hpp"
#include "inference/inference.hpp"

namespace fs = std::filesystem;

namespace lcam {

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  ckpt.params.validate();
  Archive ar;
  ar.meta = {{"kind", "lcam-checkpoint"},
             {"checkpoint_format", kCheckpointFormat},
             {"model_id", ckpt.model_id},
             {"split_point", to_string(ckpt.config.split_point)},
             {"frozen_digest", ckpt.frozen_digest},
             {"train_config", ckpt.config.to_json()},
             {"epoch", ckpt.epoch},
             {"log_digest", ckpt.log_digest}};
  const int r = ckpt.params.num_classes, k = ckpt.params.channels;
  ar.arrays.emplace_back("attention.weights", Tensor({r, k}, ckpt.params.weights));
  ar.arrays.emplace_back("attention.bias", Tensor({r}, ckpt.params.bias));
  write_archive(path, ar, ArrayDType::f64);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const Archive ar = read_archive(path);
  const auto& m = ar.meta;
  if (m.value("kind", std::string()) != "lcam-checkpoint")
    throw Error(Errc::invalid_argument, path.string() + " is not an L-CAM checkpoint");
  if (m.value("checkpoint_format", -1) != kCheckpointFormat)
    throw Error(Errc::version_mismatch, "unsupported checkpoint format " +
                                            m.value("checkpoint_format", nlohmann::json()).dump());
  Checkpoint ckpt;
  try {
    ckpt.model_id = m.at("model_id").get<std::string>();
    ckpt.frozen_digest = m.at("frozen_digest").get<std::string>();
    ckpt.config = TrainConfig::from_json(m.at("train_config"));
    ckpt.epoch = m.at("epoch").get<int>();
    ckpt.log_digest = m.at("log_digest").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, "checkpoint metadata is incomplete: " + std::string(e.what()));
  }
  if (!ar.has("attention.weights") || !ar.has("attention.bias"))
    throw Error(Errc::corrupt, "checkpoint lacks attention parameters");
  const Tensor& w = ar.array("attention.weights");
  const Tensor& b = ar.array("attention.bias");
  if (w.rank() != 2 || b.rank() != 1 || b.dim(0) != w.dim(0))
    throw Error(Errc::corrupt, "attention parameter shapes are inconsistent");
  ckpt.params = AttentionParams(w.dim(0), w.dim(1));
  ckpt.params.weights = w.storage();
  ckpt.params.bias = b.storage();
  return ckpt;
}

Checkpoint load_checkpoint(const fs::path& path, const ClassifierSplit& split) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.model_id != split.model_id())
    throw Error(Errc::digest_mismatch, "checkpoint is for model '" + ckpt.model_id +
                                           "', backbone is '" + split.model_id() + "'");
  verify_binding(split, ckpt);
  return ckpt;
}

fs::path model_cache_dir() {
  if (const char* env = std::getenv("LCAM_MODEL_CACHE"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "lcam";
  if (const char* home = std::getenv("HOME"); home && *home)
    return fs::path(home) / ".cache" / "lcam";
  return fs::path(".lcam-cache");
}

fs::path resolve_weights(const std::string& model_id, const std::optional<fs::path>& explicit_path) {
  if (explicit_path) {
    if (!fs::exists(*explicit_path))
      throw Error(Errc::not_found, "weight file not found: " + explicit_path->string());
    return *explicit_path;
  }
  const fs::path p = model_cache_dir() / (model_id + ".lcw");
  if (!fs::exists(p))
    throw Error(Errc::not_found,
                "no weights for '" + model_id + "' at " + p.string() +
                    " (set LCAM_MODEL_CACHE, pass --weights, or run tools/export_torchvision.py)");
  return p;
}

}  // namespace lcam
