#pragma once

// Minimal layer library for frozen convolutional classifiers. Every layer
// supports forward evaluation and reverse-mode gradients with respect to its
// input; parameter gradients are produced only when a ParamGrads sink is
// supplied (used by the toy-backbone fitter, never by attention training).

#include <any>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lcam::nn {

// Accumulated parameter gradients, keyed by the parameter tensor they belong to.
using ParamGrads = std::map<const Tensor*, Tensor>;

struct NamedTensor {
  std::string name;
  Tensor value;
  bool trainable = true;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;

  // `saved` receives what backward() needs; nullptr means inference only.
  virtual Tensor forward(const Tensor& x, std::any* saved) const = 0;
  virtual Tensor backward(const Tensor& grad_out, const std::any& saved,
                          ParamGrads* grads) const = 0;

  virtual void collect(std::vector<NamedTensor*>& out) { (void)out; }
  virtual void collect(std::vector<const NamedTensor*>& out) const { (void)out; }
};

using LayerPtr = std::unique_ptr<Layer>;

class Conv2d final : public Layer {
 public:
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride = 1,
         int padding = 0, bool bias = true);

  std::string kind() const override { return "conv"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;
  void collect(std::vector<NamedTensor*>& out) override;
  void collect(std::vector<const NamedTensor*>& out) const override;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  int in_, out_, kernel_, stride_, padding_;
  NamedTensor weight_;
  std::optional<NamedTensor> bias_;
};

class ReLU final : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int padding = 0)
      : kernel_(kernel), stride_(stride), padding_(padding) {}

  std::string kind() const override { return "maxpool"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;

 private:
  int kernel_, stride_, padding_;
};

// Adaptive average pooling with the usual floor/ceil bin boundaries.
class AdaptiveAvgPool2d final : public Layer {
 public:
  AdaptiveAvgPool2d(int out_h, int out_w) : out_h_(out_h), out_w_(out_w) {}

  std::string kind() const override { return "avgpool"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;

 private:
  int out_h_, out_w_;
};

class Flatten final : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;
};

class Linear final : public Layer {
 public:
  Linear(const std::string& name, int in_features, int out_features);

  std::string kind() const override { return "linear"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;
  void collect(std::vector<NamedTensor*>& out) override;
  void collect(std::vector<const NamedTensor*>& out) const override;

 private:
  int in_, out_;
  NamedTensor weight_, bias_;
};

// Inference-mode batch normalization (running statistics, no updates).
class BatchNorm2d final : public Layer {
 public:
  BatchNorm2d(const std::string& name, int channels, double eps = 1e-5);

  std::string kind() const override { return "batchnorm"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;
  void collect(std::vector<NamedTensor*>& out) override;
  void collect(std::vector<const NamedTensor*>& out) const override;

 private:
  std::vector<double> scale() const;

  int channels_;
  double eps_;
  NamedTensor weight_, bias_, mean_, var_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;

  void add(LayerPtr layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  std::string kind() const override { return "sequential"; }
  Shape output_shape(const Shape& in) const override;
  Shape output_shape(const Shape& in, std::size_t begin, std::size_t end) const;
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;
  void collect(std::vector<NamedTensor*>& out) override;
  void collect(std::vector<const NamedTensor*>& out) const override;

  // Runs layers [begin, end). `tape` (optional) receives one entry per layer.
  Tensor forward_range(const Tensor& x, std::size_t begin, std::size_t end,
                       std::vector<std::any>* tape) const;
  Tensor backward_range(const Tensor& grad_out, std::size_t begin, std::size_t end,
                        const std::vector<std::any>& tape, ParamGrads* grads) const;

 private:
  std::vector<LayerPtr> layers_;
};

// ResNet bottleneck block (1x1 -> 3x3(stride) -> 1x1, expansion 4).
class Bottleneck final : public Layer {
 public:
  Bottleneck(const std::string& prefix, int in_channels, int width, int stride);

  std::string kind() const override { return "bottleneck"; }
  Shape output_shape(const Shape& in) const override;
  Tensor forward(const Tensor& x, std::any* saved) const override;
  Tensor backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const override;
  void collect(std::vector<NamedTensor*>& out) override;
  void collect(std::vector<const NamedTensor*>& out) const override;

 private:
  Sequential main_;
  std::unique_ptr<Sequential> downsample_;
};

}  // namespace lcam::nn
