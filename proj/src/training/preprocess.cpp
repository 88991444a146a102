#include "training/preprocess.hpp"

#include <opencv2/imgproc.hpp>

#include <cmath>
#include <cstring>
#include <string>

namespace lcam {

std::pair<int, int> resized_dims(int width, int height, int shorter) {
  if (width <= 0 || height <= 0 || shorter <= 0)
    throw Error(Errc::invalid_argument, "resize needs positive dimensions");
  if (width <= height) {
    return {shorter, static_cast<int>(static_cast<long long>(shorter) * height / width)};
  }
  return {static_cast<int>(static_cast<long long>(shorter) * width / height), shorter};
}

CropWindow center_crop_offset(int width, int height, int crop) {
  if (crop > width || crop > height)
    throw Error(Errc::invalid_argument, "crop " + std::to_string(crop) + " exceeds image " +
                                            std::to_string(width) + "x" + std::to_string(height));
  return {static_cast<int>(std::nearbyint((width - crop) / 2.0)),
          static_cast<int>(std::nearbyint((height - crop) / 2.0))};
}

RawImage resize_shorter_side(const RawImage& image, int shorter) {
  const auto [w, h] = resized_dims(image.width, image.height, shorter);
  if (w == image.width && h == image.height) return image;
  cv::Mat src(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.rgb.data()));
  cv::Mat dst;
  const bool shrinking = w < image.width;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  RawImage out(w, h);
  for (int y = 0; y < h; ++y)
    std::memcpy(out.pixel(0, y), dst.ptr<std::uint8_t>(y), static_cast<std::size_t>(w) * 3);
  return out;
}

RawImage crop_image(const RawImage& image, CropWindow at, int size) {
  if (at.x < 0 || at.y < 0 || at.x + size > image.width || at.y + size > image.height)
    throw Error(Errc::invalid_argument, "crop window outside image");
  RawImage out(size, size);
  for (int y = 0; y < size; ++y)
    std::memcpy(out.pixel(0, y), image.pixel(at.x, at.y + y), static_cast<std::size_t>(size) * 3);
  return out;
}

Image normalize(const RawImage& crop, const PreprocessSpec& spec) {
  Image out(3, crop.height, crop.width);
  const std::size_t plane = static_cast<std::size_t>(crop.height) * crop.width;
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c)
      out.pixels[c * plane + i] =
          (crop.rgb[i * 3 + c] / 255.0 - spec.mean[c]) / spec.stddev[c];
  return out;
}

Preprocessed preprocess_train(const RawImage& raw, const PreprocessSpec& spec,
                              std::mt19937_64& rng) {
  RawImage resized = resize_shorter_side(raw, spec.resize_shorter);
  if (spec.crop > resized.width || spec.crop > resized.height)
    throw Error(Errc::invalid_argument, "crop larger than resized image");
  std::uniform_int_distribution<int> dx(0, resized.width - spec.crop);
  std::uniform_int_distribution<int> dy(0, resized.height - spec.crop);
  CropWindow at;
  at.x = dx(rng);
  at.y = dy(rng);
  RawImage view = crop_image(resized, at, spec.crop);
  Image image = normalize(view, spec);
  return {std::move(image), std::move(view), at};
}

Preprocessed preprocess_eval(const RawImage& raw, const PreprocessSpec& spec) {
  RawImage resized = resize_shorter_side(raw, spec.resize_shorter);
  const CropWindow at = center_crop_offset(resized.width, resized.height, spec.crop);
  RawImage view = crop_image(resized, at, spec.crop);
  Image image = normalize(view, spec);
  return {std::move(image), std::move(view), at};
}

Preprocessed preprocess_train(const std::filesystem::path& file, const PreprocessSpec& spec,
                              std::mt19937_64& rng) {
  return preprocess_train(decode_image(file), spec, rng);
}

Preprocessed preprocess_eval(const std::filesystem::path& file, const PreprocessSpec& spec) {
  return preprocess_eval(decode_image(file), spec);
}

}  // namespace lcam
