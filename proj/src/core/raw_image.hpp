#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lcam {

// 8-bit RGB pixels, row-major, interleaved (H x W x 3).
struct RawImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  RawImage() = default;
  RawImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

// Decodes any format OpenCV understands; grey images are replicated to RGB.
RawImage decode_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& image);

// Random-access collection of undecoded-or-decoded training/eval images.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual std::size_t size() const = 0;
  virtual RawImage load(std::size_t index) const = 0;
};

class InMemoryImages final : public ImageSource {
 public:
  explicit InMemoryImages(std::vector<RawImage> images) : images_(std::move(images)) {}
  std::size_t size() const override { return images_.size(); }
  RawImage load(std::size_t index) const override { return images_.at(index); }

 private:
  std::vector<RawImage> images_;
};

}  // namespace lcam
