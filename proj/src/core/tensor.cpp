#include "core/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace lcam {

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::size_t shape_volume(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_volume(shape_))
    throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_volume(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_)
    throw ShapeError("shape mismatch in +=: " + shape_string(shape_) + " vs " +
                     shape_string(other.shape_));
  std::transform(data_.begin(), data_.end(), other.data_.begin(), data_.begin(), std::plus<>());
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Map2D::Map2D(int r, int c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
  if (r < 0 || c < 0 || values.size() != static_cast<std::size_t>(r) * c)
    throw ShapeError("map data size does not match " + std::to_string(r) + "x" +
                     std::to_string(c));
}

double Map2D::min() const { return *std::min_element(values.begin(), values.end()); }
double Map2D::max() const { return *std::max_element(values.begin(), values.end()); }

}  // namespace lcam
