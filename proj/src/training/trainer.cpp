#include "training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "core/digest.hpp"
#include "masking/masking.hpp"
#include "training/preprocess.hpp"

namespace lcam {

std::string to_string(Variant v) { return v == Variant::fm ? "fm" : "img"; }

Variant parse_variant(std::string_view text) {
  if (text == "fm" || text == "Fm") return Variant::fm;
  if (text == "img" || text == "Img") return Variant::img;
  throw Error(Errc::invalid_argument, "unknown variant '" + std::string(text) + "' (fm|img)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(Errc::invalid_argument, "batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(Errc::invalid_argument, "lr must be > 0");
  if (!(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0))
    throw Error(Errc::invalid_argument, "lr_decay_per_epoch must lie in (0, 1]");
  if (epochs < 0) throw Error(Errc::invalid_argument, "epochs must be >= 0");
  loss_weights.validate();
}

double TrainConfig::lr_at_epoch(int epoch) const {
  return lr * std::pow(lr_decay_per_epoch, static_cast<double>(epoch));
}

nlohmann::json TrainConfig::to_json() const {
  return {{"variant", to_string(variant)},
          {"batch_size", batch_size},
          {"lr", lr},
          {"lr_decay_per_epoch", lr_decay_per_epoch},
          {"epochs", epochs},
          {"lambda1", loss_weights.lambda1},
          {"lambda2", loss_weights.lambda2},
          {"lambda3", loss_weights.lambda3},
          {"lambda4", loss_weights.lambda4},
          {"seed", seed},
          {"split_point", to_string(split_point)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.batch_size = j.at("batch_size");
  c.lr = j.at("lr");
  c.lr_decay_per_epoch = j.at("lr_decay_per_epoch");
  c.epochs = j.at("epochs");
  c.loss_weights = {j.at("lambda1"), j.at("lambda2"), j.at("lambda3"), j.at("lambda4")};
  c.seed = j.at("seed");
  c.split_point = parse_split_point(j.at("split_point").get<std::string>());
  return c;
}

namespace {

struct ForwardState {
  FeatureMaps features;
  int label = 0;
  NormalizedCam mask;
  Image masked_input;  // img variant only
  std::vector<std::any> feature_tape, head_tape;
  ClassScores scores;
};

ForwardState run_forward(const ClassifierSplit& split, const AttentionParams& params,
                         const Image& x, Variant variant, bool record) {
  ForwardState st;
  st.features = split.features(x);
  st.label = split.head(st.features).argmax();
  st.mask = sigmoid_normalize(compute_cam(params, st.label, st.features));
  auto* head_tape = record ? &st.head_tape : nullptr;
  if (variant == Variant::fm) {
    st.scores = split.head(mask_feature_maps(st.features, st.mask), head_tape);
  } else {
    st.masked_input = mask_image(x, st.mask);
    const FeatureMaps a2 = split.features(st.masked_input, record ? &st.feature_tape : nullptr);
    st.scores = split.head(a2, head_tape);
  }
  return st;
}

TrainForward to_public(ForwardState&& st) {
  return {std::move(st.scores), std::move(st.mask), st.label, std::move(st.features)};
}

}  // namespace

TrainForward forward_train_fm(const ClassifierSplit& split, const AttentionParams& params,
                              const Image& x) {
  return to_public(run_forward(split, params, x, Variant::fm, false));
}

TrainForward forward_train_img(const ClassifierSplit& split, const AttentionParams& params,
                               const Image& x) {
  return to_public(run_forward(split, params, x, Variant::img, false));
}

SampleLoss accumulate_gradient(const ClassifierSplit& split, const AttentionParams& params,
                               const Image& x, Variant variant, const LossWeights& lw,
                               AttentionParams& grad, double weight) {
  ForwardState st = run_forward(split, params, x, variant, true);
  const Map2D& s = st.mask.values;
  SampleLoss out{composite_loss(st.mask, st.scores, st.label, lw), st.label};

  // d total / d S, starting with the regularizers.
  Map2D grad_s = tv_loss_grad(s);
  for (double& g : grad_s.values) g *= lw.lambda1;
  const Map2D g_av = av_loss_grad(s, lw.lambda4);
  for (std::size_t i = 0; i < grad_s.size(); ++i) grad_s.values[i] += lw.lambda2 * g_av.values[i];

  if (lw.lambda3 != 0.0) {
    std::vector<double> dz = ce_loss_grad_logits(st.scores, st.label);
    for (double& v : dz) v *= lw.lambda3;
    const FeatureMaps d_masked = split.head_backward(dz, st.head_tape);
    if (variant == Variant::fm) {
      for (int k = 0; k < st.features.channels(); ++k) {
        const double* da = d_masked.plane(k);
        const double* a = st.features.plane(k);
        for (std::size_t i = 0; i < grad_s.size(); ++i) grad_s.values[i] += da[i] * a[i];
      }
    } else {
      const Image dx = split.features_backward(d_masked, st.feature_tape);
      Map2D d_up(x.height(), x.width());
      const std::size_t plane = d_up.size();
      for (int c = 0; c < x.channels(); ++c) {
        const double* g = dx.pixels.data() + c * plane;
        const double* xi = x.pixels.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) d_up.values[i] += g[i] * xi[i];
      }
      const Map2D back = bilinear_resize_adjoint(d_up, s.rows, s.cols);
      for (std::size_t i = 0; i < grad_s.size(); ++i) grad_s.values[i] += back.values[i];
    }
  }

  // Through the sigmoid onto the raw CAM.
  Map2D grad_cam(s.rows, s.cols);
  for (std::size_t i = 0; i < s.size(); ++i)
    grad_cam.values[i] = weight * grad_s.values[i] * s.values[i] * (1.0 - s.values[i]);
  accumulate_cam_gradient(st.features, st.label, grad_cam, grad);
  return out;
}

namespace {

std::string format_log_line(const StepLog& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%d,%.10g,%.10g,%.10g,%.10g,%.10g",
                static_cast<long long>(s.step), s.epoch, s.loss.tv, s.loss.av, s.loss.ce,
                s.loss.total, s.lr);
  return buf;
}

}  // namespace

TrainResult train(const ClassifierSplit& split, const ImageSource& data, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (data.size() == 0) throw Error(Errc::invalid_argument, "training set is empty");
  if (cfg.split_point != split.split_point())
    throw Error(Errc::invalid_argument, "config split point " + to_string(cfg.split_point) +
                                            " does not match the backbone split " +
                                            to_string(split.split_point()));

  const int num_classes = split.num_classes();
  const int channels = split.feature_shape()[0];
  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.params = init_params(num_classes, channels, cfg.seed);
  ckpt.config = cfg;
  ckpt.model_id = split.model_id();
  ckpt.frozen_digest = split.frozen_digest();

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto emit = [&](const std::string& line) {
    result.log_csv += line;
    result.log_csv += '\n';
    if (hooks.on_log_line) hooks.on_log_line(line);
  };
  emit(kTrainLogHeader);

  std::int64_t step = 0;
  AttentionParams grad(num_classes, channels);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at_epoch(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown epoch_sum;
    std::size_t epoch_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv_b = 1.0 / static_cast<double>(end - start);
      std::fill(grad.weights.begin(), grad.weights.end(), 0.0);
      std::fill(grad.bias.begin(), grad.bias.end(), 0.0);

      LossBreakdown mean;
      for (std::size_t i = start; i < end; ++i) {
        const Image x = preprocess_train(data.load(order[i]), split.preprocess(), rng).image;
        const SampleLoss sl = accumulate_gradient(split, ckpt.params, x, cfg.variant,
                                                  cfg.loss_weights, grad, inv_b);
        mean.tv += sl.loss.tv * inv_b;
        mean.av += sl.loss.av * inv_b;
        mean.ce += sl.loss.ce * inv_b;
        mean.total += sl.loss.total * inv_b;
      }

      const StepLog log{step, epoch, mean, lr};
      emit(format_log_line(log));
      result.steps.push_back(log);
      if (!std::isfinite(mean.total))
        throw TrainingDiverged(step, "training diverged at step " + std::to_string(step) +
                                         " (epoch " + std::to_string(epoch) +
                                         "): total loss is not finite");

      for (std::size_t i = 0; i < grad.weights.size(); ++i)
        ckpt.params.weights[i] -= lr * grad.weights[i];
      for (std::size_t i = 0; i < grad.bias.size(); ++i) ckpt.params.bias[i] -= lr * grad.bias[i];

      epoch_sum.tv += mean.tv;
      epoch_sum.av += mean.av;
      epoch_sum.ce += mean.ce;
      epoch_sum.total += mean.total;
      ++epoch_batches;
      ++step;
    }

    const double n = static_cast<double>(epoch_batches);
    result.epoch_means.push_back(
        {epoch_sum.tv / n, epoch_sum.av / n, epoch_sum.ce / n, epoch_sum.total / n});
    ckpt.epoch = epoch + 1;
    ckpt.log_digest = sha256_hex(result.log_csv);
    if (hooks.on_epoch_end) hooks.on_epoch_end(ckpt);
  }
  ckpt.log_digest = sha256_hex(result.log_csv);
  return result;
}

}  // namespace lcam
