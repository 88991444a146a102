#pragma once

#include <any>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "backbone/types.hpp"
#include "nn/layers.hpp"

namespace lcam {

enum class SplitPoint { last_conv, after_last_maxpool };

std::string to_string(SplitPoint sp);
// Accepts "last_conv", "after_last_maxpool" and the short alias "post_pool".
SplitPoint parse_split_point(std::string_view text);

// Declarative architecture description. `layers` is a JSON array of layer
// records ({"type": "conv", "name": ..., "in": ..., "out": ..., "kernel": ...},
// {"type": "relu"}, {"type": "maxpool", ...}, {"type": "bottleneck", ...}, ...).
struct ArchSpec {
  std::string model_id;
  nlohmann::json layers = nlohmann::json::array();
  Shape input;  // C x H x W
  PreprocessSpec preprocess;

  nlohmann::json to_json() const;
  static ArchSpec from_json(const nlohmann::json& j);
};

struct TinyCnnSpec {
  int input_size = 32;
  int conv1_channels = 16;
  int conv2_channels = 32;
  int num_classes = 10;
};

// Built-in architectures: "vgg16", "resnet50", "tinycnn".
ArchSpec builtin_arch(std::string_view model_id);
ArchSpec tiny_cnn_arch(const TinyCnnSpec& spec, std::string model_id = "tinycnn");

std::unique_ptr<nn::Sequential> build_network(const ArchSpec& arch);
// He-normal weights, zero biases, identity batch norms.
void init_random(nn::Sequential& net, std::uint64_t seed);

// Layer index ranges [0, split) and [split, n) for a split point.
std::size_t find_split_index(const ArchSpec& arch, SplitPoint sp);

// Content hash of every backbone parameter (names, shapes and values).
std::string parameter_digest(const nn::Sequential& net);

void save_weights(const std::filesystem::path& path, const ArchSpec& arch,
                  const nn::Sequential& net);

struct WeightFile {
  std::filesystem::path path;
};
struct RandomWeights {
  std::uint64_t seed = 0;
};
using WeightSource = std::variant<WeightFile, RandomWeights>;

// Frozen classifier f split into feature_extractor (input -> A) and head
// (A -> class scores). Read-only after construction; feature passes are
// counted so callers can verify forward-pass budgets.
class ClassifierSplit {
 public:
  ClassifierSplit(ArchSpec arch, std::unique_ptr<nn::Sequential> net, SplitPoint split_point);

  const std::string& model_id() const { return arch_.model_id; }
  SplitPoint split_point() const { return split_point_; }
  const ArchSpec& arch() const { return arch_; }
  const PreprocessSpec& preprocess() const { return arch_.preprocess; }
  int num_classes() const { return num_classes_; }
  const Shape& input_shape() const { return arch_.input; }
  // (K, P, Q) of the feature maps.
  const Shape& feature_shape() const { return feature_shape_; }

  const std::string& frozen_digest() const { return frozen_digest_; }
  std::string current_digest() const { return parameter_digest(*net_); }

  FeatureMaps features(const Image& x, std::vector<std::any>* tape = nullptr) const;
  ClassScores head(const FeatureMaps& a, std::vector<std::any>* tape = nullptr) const;
  // The unsplit classifier f, run layer by layer over the whole network.
  ClassScores classify(const Image& x) const;

  // Reverse-mode products through the frozen network (no parameter updates).
  FeatureMaps head_backward(const std::vector<double>& grad_logits,
                            const std::vector<std::any>& tape) const;
  Image features_backward(const FeatureMaps& grad_features,
                          const std::vector<std::any>& tape) const;

  std::uint64_t pass_count() const { return passes_.load(); }

 private:
  ArchSpec arch_;
  std::unique_ptr<nn::Sequential> net_;
  SplitPoint split_point_;
  std::size_t split_index_;
  Shape feature_shape_;
  int num_classes_;
  std::string frozen_digest_;
  mutable std::atomic<std::uint64_t> passes_{0};
};

std::unique_ptr<ClassifierSplit> split_classifier(std::string_view model_id, SplitPoint sp,
                                                  const WeightSource& weights);

// Top-1 label of f on x and its probability; one feature pass.
struct ModelTruth {
  int label;
  double confidence;
};
ModelTruth model_truth_label(const ClassifierSplit& split, const Image& x);

}  // namespace lcam
