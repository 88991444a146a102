#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "backbone/backbone.hpp"
#include "core/raw_image.hpp"

namespace lcam::toy {

// Ten classes, one object colour each. The object is a filled square or a plus
// sign of random size and position on a grey noise background.
inline constexpr int kToyClasses = 10;

struct ToyDataset {
  std::vector<RawImage> images;
  std::vector<int> labels;
};

RawImage render_toy_image(int label, int size, std::mt19937_64& rng);
// `per_class` images of every class, interleaved by class, reproducible per seed.
ToyDataset make_toy_dataset(int per_class, std::uint64_t seed, int size = 32);

struct FitConfig {
  int epochs = 12;
  int batch_size = 32;
  double lr = 0.02;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct FitResult {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

// Supervised cross-entropy fit of every parameter of `net` (used only to
// produce a toy backbone; L-CAM training never calls this).
FitResult fit_classifier(nn::Sequential& net, const ArchSpec& arch, const ToyDataset& data,
                         const FitConfig& cfg);

// Fraction of images whose top-1 prediction equals the label.
double accuracy(const ClassifierSplit& split, const ToyDataset& data);

// Writes <dir>/class_XX/img_NNNN.png for every image.
void write_dataset(const std::filesystem::path& dir, const ToyDataset& data);

struct ToyArtifacts {
  std::filesystem::path train_dir;
  std::filesystem::path test_dir;
  std::filesystem::path weights;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Generates train/test sets, fits the tiny CNN and saves it as tinycnn.lcw.
ToyArtifacts make_toy(const std::filesystem::path& dir, int train_per_class, int test_per_class,
                      std::uint64_t seed, const FitConfig& fit = {});

}  // namespace lcam::toy
