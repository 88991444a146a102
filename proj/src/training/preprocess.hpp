#pragma once

#include <filesystem>
#include <random>

#include "backbone/types.hpp"
#include "core/raw_image.hpp"

namespace lcam {

struct CropWindow {
  int x = 0;
  int y = 0;
};

// Dimensions after scaling the shorter side to `shorter`, aspect preserved
// (the longer side is truncated, e.g. 512x341 -> 384x256).
std::pair<int, int> resized_dims(int width, int height, int shorter);
CropWindow center_crop_offset(int width, int height, int crop);

RawImage resize_shorter_side(const RawImage& image, int shorter);
RawImage crop_image(const RawImage& image, CropWindow at, int size);
// Per-channel (v / 255 - mean) / std, returned as C x H x W.
Image normalize(const RawImage& crop, const PreprocessSpec& spec);

struct Preprocessed {
  Image image;       // network input
  RawImage view;     // the same crop before normalization, for overlays
  CropWindow window;
};

Preprocessed preprocess_train(const RawImage& raw, const PreprocessSpec& spec,
                              std::mt19937_64& rng);
Preprocessed preprocess_eval(const RawImage& raw, const PreprocessSpec& spec);

Preprocessed preprocess_train(const std::filesystem::path& file, const PreprocessSpec& spec,
                              std::mt19937_64& rng);
Preprocessed preprocess_eval(const std::filesystem::path& file, const PreprocessSpec& spec);

}  // namespace lcam
