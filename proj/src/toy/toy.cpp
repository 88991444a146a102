#include "toy/toy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "training/preprocess.hpp"

namespace fs = std::filesystem;

namespace lcam::toy {

namespace {

// One object colour per class. Shapes vary within a class so that colour is
// the only label cue and the object alone carries it.
constexpr std::array<std::array<int, 3>, kToyClasses> kColours{{
    {220, 40, 40},    // red
    {40, 200, 60},    // green
    {50, 80, 230},    // blue
    {230, 210, 40},   // yellow
    {210, 50, 210},   // magenta
    {40, 210, 210},   // cyan
    {240, 130, 20},   // orange
    {120, 40, 170},   // purple
    {245, 245, 245},  // white
    {15, 15, 15},     // black
}};

std::uint8_t clamp_u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

}  // namespace

RawImage render_toy_image(int label, int size, std::mt19937_64& rng) {
  if (label < 0 || label >= kToyClasses) throw Error(Errc::invalid_argument, "toy label out of range");
  RawImage img(size, size);
  std::uniform_int_distribution<int> grey(78, 177), jitter(-12, 12);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int g = grey(rng);
      std::uint8_t* p = img.pixel(x, y);
      for (int c = 0; c < 3; ++c) p[c] = clamp_u8(g + jitter(rng));
    }

  const auto& colour = kColours[static_cast<std::size_t>(label)];
  const bool plus = std::bernoulli_distribution(0.5)(rng);
  const int extent = std::uniform_int_distribution<int>(size / 4 + 1, size * 3 / 8 + 1)(rng);
  const int x0 = std::uniform_int_distribution<int>(1, size - extent - 1)(rng);
  const int y0 = std::uniform_int_distribution<int>(1, size - extent - 1)(rng);
  const int bar = std::max(2, extent / 3);
  const int mid_lo = (extent - bar) / 2, mid_hi = mid_lo + bar;
  for (int dy = 0; dy < extent; ++dy)
    for (int dx = 0; dx < extent; ++dx) {
      if (plus && !((dx >= mid_lo && dx < mid_hi) || (dy >= mid_lo && dy < mid_hi))) continue;
      std::uint8_t* p = img.pixel(x0 + dx, y0 + dy);
      for (int c = 0; c < 3; ++c) p[c] = clamp_u8(colour[c] + jitter(rng));
    }
  return img;
}

ToyDataset make_toy_dataset(int per_class, std::uint64_t seed, int size) {
  if (per_class < 1) throw Error(Errc::invalid_argument, "per_class must be >= 1");
  std::mt19937_64 rng(seed);
  ToyDataset d;
  for (int i = 0; i < per_class; ++i)
    for (int c = 0; c < kToyClasses; ++c) {
      d.images.push_back(render_toy_image(c, size, rng));
      d.labels.push_back(c);
    }
  return d;
}

FitResult fit_classifier(nn::Sequential& net, const ArchSpec& arch, const ToyDataset& data,
                         const FitConfig& cfg) {
  if (data.images.empty()) throw Error(Errc::invalid_argument, "empty toy dataset");
  std::vector<Tensor> inputs;
  for (const auto& img : data.images) inputs.push_back(normalize(img, arch.preprocess).pixels);

  std::vector<nn::NamedTensor*> params;
  net.collect(params);
  std::vector<Tensor> velocity;
  for (auto* p : params) velocity.emplace_back(p->value.shape());

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  FitResult result;
  const std::size_t n_layers = net.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv_b = 1.0 / static_cast<double>(end - start);
      nn::ParamGrads grads;
      for (std::size_t i = start; i < end; ++i) {
        std::vector<std::any> tape;
        const Tensor logits = net.forward_range(inputs[order[i]], 0, n_layers, &tape);
        const ClassScores s = ClassScores::from_logits(logits.storage());
        const int y = data.labels[order[i]];
        loss_sum -= std::log(std::max(s.probs[y], 1e-300));
        Tensor g(logits.shape());
        for (std::size_t k = 0; k < g.size(); ++k)
          g[k] = (s.probs[k] - (static_cast<int>(k) == y ? 1.0 : 0.0)) * inv_b;
        net.backward_range(g, 0, n_layers, tape, &grads);
      }
      for (std::size_t j = 0; j < params.size(); ++j) {
        auto it = grads.find(&params[j]->value);
        if (it == grads.end() || !params[j]->trainable) continue;
        Tensor& v = velocity[j];
        for (std::size_t k = 0; k < v.size(); ++k) {
          v[k] = cfg.momentum * v[k] - cfg.lr * it->second[k];
          params[j]->value[k] += v[k];
        }
      }
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(inputs.size()));
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor logits = net.forward(inputs[i], nullptr);
    const auto it = std::max_element(logits.storage().begin(), logits.storage().end());
    if (static_cast<int>(it - logits.storage().begin()) == data.labels[i]) ++correct;
  }
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
  return result;
}

double accuracy(const ClassifierSplit& split, const ToyDataset& data) {
  if (data.images.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.images.size(); ++i)
    if (model_truth_label(split, preprocess_eval(data.images[i], split.preprocess()).image).label ==
        data.labels[i])
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.images.size());
}

void write_dataset(const fs::path& dir, const ToyDataset& data) {
  std::vector<int> counters(kToyClasses, 0);
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    char cls[32], file[32];
    std::snprintf(cls, sizeof(cls), "class_%02d", data.labels[i]);
    std::snprintf(file, sizeof(file), "img_%04d.png", counters[data.labels[i]]++);
    fs::create_directories(dir / cls);
    write_png(dir / cls / file, data.images[i]);
  }
}

ToyArtifacts make_toy(const fs::path& dir, int train_per_class, int test_per_class,
                      std::uint64_t seed, const FitConfig& fit) {
  const ToyDataset train = make_toy_dataset(train_per_class, seed);
  const ToyDataset test = make_toy_dataset(test_per_class, seed + 1);

  const ArchSpec arch = tiny_cnn_arch(TinyCnnSpec{});
  auto net = build_network(arch);
  init_random(*net, seed);
  FitConfig fc = fit;
  fc.seed = seed;
  const FitResult fr = fit_classifier(*net, arch, train, fc);

  ToyArtifacts out;
  out.train_dir = dir / "train";
  out.test_dir = dir / "test";
  out.weights = dir / "tinycnn.lcw";
  fs::create_directories(dir);
  write_dataset(out.train_dir, train);
  write_dataset(out.test_dir, test);
  save_weights(out.weights, arch, *net);
  out.train_accuracy = fr.train_accuracy;

  const auto split = split_classifier("tinycnn", SplitPoint::last_conv, WeightFile{out.weights});
  out.test_accuracy = accuracy(*split, test);
  return out;
}

}  // namespace lcam::toy
