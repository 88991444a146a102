#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "attention/attention_cam.hpp"
#include "backbone/backbone.hpp"
#include "core/raw_image.hpp"
#include "training/trainer.hpp"

namespace lcam {

enum class SaliencySource { lcam, baseline_random, baseline_center };
std::string to_string(SaliencySource s);

// Image-resolution explanation, values in [0, 1].
struct SaliencyMap {
  Map2D values;
  int class_index = 0;
  SaliencySource source = SaliencySource::lcam;
};

// (v - min) / (max - min); a constant map becomes all zeros.
Map2D minmax_normalize(const Map2D& m);
inline Map2D minmax_normalize(const Cam& cam) { return minmax_normalize(cam.values); }

// One feature pass: A (and y when not given) -> L^(y) -> min-max -> upscale.
// `scores`, when given, receives the head output for the same pass.
SaliencyMap explain(const ClassifierSplit& split, const AttentionParams& params, const Image& x,
                    std::optional<int> y = std::nullopt, ClassScores* scores = nullptr);

// Throws digest_mismatch unless the checkpoint was trained on this exact backbone.
void verify_binding(const ClassifierSplit& split, const Checkpoint& ckpt);

class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual std::string method_id() const = 0;
  // Feature passes spent per explanation (the "#FW" figure).
  virtual int passes_per_explanation() const = 0;
  virtual SaliencyMap explain(const Image& x, std::optional<int> y) const = 0;
};

class LcamExplainer final : public Explainer {
 public:
  LcamExplainer(const ClassifierSplit& split, const Checkpoint& ckpt,
                std::string method_id = "L-CAM");
  std::string method_id() const override { return method_id_; }
  int passes_per_explanation() const override { return 1; }
  SaliencyMap explain(const Image& x, std::optional<int> y) const override;

 private:
  const ClassifierSplit& split_;
  AttentionParams params_;
  std::string method_id_;
};

// Uniform noise saliency; seeded per image content so results are pure.
class RandomBaseline final : public Explainer {
 public:
  explicit RandomBaseline(std::uint64_t seed) : seed_(seed) {}
  std::string method_id() const override { return "baseline_random"; }
  int passes_per_explanation() const override { return 0; }
  SaliencyMap explain(const Image& x, std::optional<int> y) const override;

 private:
  std::uint64_t seed_;
};

// Fixed isotropic Gaussian centred on the image, sigma = sigma_fraction * min(H, W).
class CenterBaseline final : public Explainer {
 public:
  explicit CenterBaseline(double sigma_fraction = 0.25) : sigma_fraction_(sigma_fraction) {}
  std::string method_id() const override { return "baseline_center"; }
  int passes_per_explanation() const override { return 0; }
  SaliencyMap explain(const Image& x, std::optional<int> y) const override;

 private:
  double sigma_fraction_;
};

// Jet heatmap blended 50/50 with the (cropped, unnormalized) input.
RawImage render_overlay(const RawImage& view, const Map2D& saliency);

struct OverlayFiles {
  std::filesystem::path png;
  std::filesystem::path npy;
};
// Writes <stem>.png (overlay) and <stem>.npy (raw saliency values) into dir.
OverlayFiles export_overlay(const RawImage& view, const SaliencyMap& v,
                            const std::filesystem::path& dir, const std::string& stem);

}  // namespace lcam
