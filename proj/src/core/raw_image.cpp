#include "core/raw_image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstring>

#include "core/errors.hpp"

namespace lcam {

RawImage decode_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::not_found, "no such image: " + path.string());
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw Error(Errc::corrupt, "cannot decode " + path.string() + ": " + e.what());
  }
  if (bgr.empty()) throw Error(Errc::corrupt, "cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RawImage out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y)
    std::memcpy(out.pixel(0, y), rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3);
  return out;
}

void write_png(const std::filesystem::path& path, const RawImage& image) {
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.rgb.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw Error(Errc::io, "cannot write " + path.string());
}

}  // namespace lcam
