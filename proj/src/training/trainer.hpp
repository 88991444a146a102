#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attention/attention_cam.hpp"
#include "backbone/backbone.hpp"
#include "core/raw_image.hpp"
#include "losses/losses.hpp"

namespace lcam {

enum class Variant { fm, img };

std::string to_string(Variant v);
Variant parse_variant(std::string_view text);

struct TrainConfig {
  Variant variant = Variant::img;
  int batch_size = 64;
  double lr = 1e-4;
  double lr_decay_per_epoch = 0.75;
  int epochs = 7;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  SplitPoint split_point = SplitPoint::last_conv;

  void validate() const;
  // lr * decay^epoch
  double lr_at_epoch(int epoch) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Checkpoint {
  AttentionParams params;
  TrainConfig config;
  int epoch = 0;
  std::string model_id;
  std::string frozen_digest;
  std::string log_digest;
};

// Output of a training-mode forward pass for one image.
struct TrainForward {
  ClassScores scores;   // classifier output on the masked input / features
  NormalizedCam mask;   // sigma(L^(y))
  int label = 0;        // model-truth label of the unmasked input
  FeatureMaps features; // A of the unmasked input
};

// Feature-map masking: one feature pass.
TrainForward forward_train_fm(const ClassifierSplit& split, const AttentionParams& params,
                              const Image& x);
// Image masking: one pass for A and y, a second over the masked image.
TrainForward forward_train_img(const ClassifierSplit& split, const AttentionParams& params,
                               const Image& x);

struct SampleLoss {
  LossBreakdown loss;
  int label = 0;
};

// Adds weight * d(total)/d(params) into `grad` and returns the loss terms.
SampleLoss accumulate_gradient(const ClassifierSplit& split, const AttentionParams& params,
                               const Image& x, Variant variant, const LossWeights& lw,
                               AttentionParams& grad, double weight = 1.0);

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  LossBreakdown loss;
  double lr = 0.0;
};

struct TrainHooks {
  // Called once per epoch with the checkpoint state after that epoch.
  std::function<void(const Checkpoint&)> on_epoch_end;
  // Receives every CSV line of the training log (header first).
  std::function<void(const std::string&)> on_log_line;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossBreakdown> epoch_means;
  std::vector<StepLog> steps;
  std::string log_csv;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::int64_t step, const std::string& what)
      : Error(Errc::diverged, what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

inline constexpr const char* kTrainLogHeader = "step,epoch,tv,av,ce,total,lr";

// Trains the attention head with plain SGD while the backbone stays frozen.
TrainResult train(const ClassifierSplit& split, const ImageSource& data, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace lcam
