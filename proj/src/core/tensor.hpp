#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace lcam {

using Shape = std::vector<int>;

std::string shape_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

// Dense row-major double tensor. Single-sample activations use C x H x W.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int c, int h, int w) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }
  double at(int c, int h, int w) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + h) * shape_[2] + w];
  }

  Tensor reshaped(Shape shape) const;
  void fill(double v);

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Row-major 2-D map (rows x cols). Used for CAMs, masks and saliency maps.
struct Map2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Map2D() = default;
  Map2D(int r, int c, double fill = 0.0)
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}
  Map2D(int r, int c, std::vector<double> v);

  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t size() const { return values.size(); }
  double min() const;
  double max() const;

  friend bool operator==(const Map2D&, const Map2D&) = default;
};

}  // namespace lcam
