#include "nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace lcam::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void require_chw(const Tensor& x, const char* who) {
  if (x.rank() != 3) throw ShapeError(std::string(who) + ": expected CxHxW input, got " +
                                      shape_string(x.shape()));
}

Tensor& grad_slot(ParamGrads& grads, const Tensor& param) {
  auto it = grads.find(&param);
  if (it == grads.end()) it = grads.emplace(&param, Tensor(param.shape())).first;
  return it->second;
}

struct ConvGeometry {
  int channels, height, width, kernel, stride, padding, out_h, out_w;
  bool trivial() const { return kernel == 1 && stride == 1 && padding == 0; }
};

RowMat im2col(const Tensor& x, const ConvGeometry& g) {
  const int kk = g.kernel * g.kernel;
  RowMat cols(static_cast<Eigen::Index>(g.channels) * kk,
              static_cast<Eigen::Index>(g.out_h) * g.out_w);
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        double* row = cols.row((c * g.kernel + ki) * g.kernel + kj).data();
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.padding + ki;
          double* dst = row + static_cast<std::size_t>(oh) * g.out_w;
          if (ih < 0 || ih >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = x.data() + (static_cast<std::size_t>(c) * g.height + ih) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.padding + kj;
            dst[ow] = (iw >= 0 && iw < g.width) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const RowMat& cols, const ConvGeometry& g, Tensor& dx) {
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        const double* row = cols.row((c * g.kernel + ki) * g.kernel + kj).data();
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.padding + ki;
          if (ih < 0 || ih >= g.height) continue;
          double* dst = dx.data() + (static_cast<std::size_t>(c) * g.height + ih) * g.width;
          const double* src = row + static_cast<std::size_t>(oh) * g.out_w;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.padding + kj;
            if (iw >= 0 && iw < g.width) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride,
               int padding, bool bias)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding),
      weight_{name + ".weight", Tensor({out_channels, in_channels, kernel, kernel})} {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || padding < 0)
    throw std::invalid_argument("conv " + name + ": invalid geometry");
  if (bias) bias_ = NamedTensor{name + ".bias", Tensor({out_channels})};
}

Shape Conv2d::output_shape(const Shape& in) const {
  if (in.size() != 3 || in[0] != in_)
    throw ShapeError("conv " + weight_.name + ": bad input " + shape_string(in));
  const int oh = (in[1] + 2 * padding_ - kernel_) / stride_ + 1;
  const int ow = (in[2] + 2 * padding_ - kernel_) / stride_ + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv " + weight_.name + ": input too small");
  return {out_, oh, ow};
}

Tensor Conv2d::forward(const Tensor& x, std::any* saved) const {
  require_chw(x, "conv");
  const Shape os = output_shape(x.shape());
  const ConvGeometry g{in_, x.dim(1), x.dim(2), kernel_, stride_, padding_, os[1], os[2]};
  Tensor y(os);
  const Eigen::Index spatial = static_cast<Eigen::Index>(g.out_h) * g.out_w;
  ConstMatMap w(weight_.value.data(), out_, static_cast<Eigen::Index>(in_) * kernel_ * kernel_);
  MatMap out(y.data(), out_, spatial);
  if (g.trivial()) {
    out.noalias() = w * ConstMatMap(x.data(), in_, spatial);
  } else {
    out.noalias() = w * im2col(x, g);
  }
  if (bias_) out.colwise() += ConstVecMap(bias_->value.data(), out_);
  if (saved) *saved = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const {
  const auto& x = std::any_cast<const Tensor&>(saved);
  const ConvGeometry g{in_, x.dim(1), x.dim(2), kernel_, stride_, padding_, grad_out.dim(1),
                       grad_out.dim(2)};
  const Eigen::Index spatial = static_cast<Eigen::Index>(g.out_h) * g.out_w;
  const Eigen::Index patch = static_cast<Eigen::Index>(in_) * kernel_ * kernel_;
  ConstMatMap w(weight_.value.data(), out_, patch);
  ConstMatMap gout(grad_out.data(), out_, spatial);

  Tensor dx(x.shape());
  if (g.trivial()) {
    MatMap(dx.data(), in_, spatial).noalias() = w.transpose() * gout;
  } else {
    RowMat dcols = w.transpose() * gout;
    col2im(dcols, g, dx);
  }

  if (grads) {
    Tensor& dw = grad_slot(*grads, weight_.value);
    MatMap dwm(dw.data(), out_, patch);
    if (g.trivial()) {
      dwm.noalias() += gout * ConstMatMap(x.data(), in_, spatial).transpose();
    } else {
      dwm.noalias() += gout * im2col(x, g).transpose();
    }
    if (bias_) {
      Tensor& db = grad_slot(*grads, bias_->value);
      VecMap(db.data(), out_) += gout.rowwise().sum();
    }
  }
  return dx;
}

void Conv2d::collect(std::vector<NamedTensor*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

void Conv2d::collect(std::vector<const NamedTensor*>& out) const {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, std::any* saved) const {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  if (saved) *saved = y;
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out, const std::any& saved, ParamGrads*) const {
  const auto& y = std::any_cast<const Tensor&>(saved);
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(y[i] > 0.0)) dx[i] = 0.0;
  return dx;
}

// ---------------------------------------------------------------- MaxPool2d

namespace {
struct PoolSaved {
  Shape in_shape;
  std::vector<std::size_t> argmax;
};
}  // namespace

Shape MaxPool2d::output_shape(const Shape& in) const {
  if (in.size() != 3) throw ShapeError("maxpool: bad input " + shape_string(in));
  const int oh = (in[1] + 2 * padding_ - kernel_) / stride_ + 1;
  const int ow = (in[2] + 2 * padding_ - kernel_) / stride_ + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("maxpool: input too small " + shape_string(in));
  return {in[0], oh, ow};
}

Tensor MaxPool2d::forward(const Tensor& x, std::any* saved) const {
  require_chw(x, "maxpool");
  const Shape os = output_shape(x.shape());
  const int h = x.dim(1), w = x.dim(2);
  Tensor y(os);
  PoolSaved ps{x.shape(), std::vector<std::size_t>(y.size())};
  std::size_t o = 0;
  for (int c = 0; c < os[0]; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * h * w;
    for (int oh = 0; oh < os[1]; ++oh) {
      for (int ow = 0; ow < os[2]; ++ow, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = base;
        for (int ki = 0; ki < kernel_; ++ki) {
          const int ih = oh * stride_ - padding_ + ki;
          if (ih < 0 || ih >= h) continue;
          for (int kj = 0; kj < kernel_; ++kj) {
            const int iw = ow * stride_ - padding_ + kj;
            if (iw < 0 || iw >= w) continue;
            const std::size_t idx = base + static_cast<std::size_t>(ih) * w + iw;
            if (x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        y[o] = best;
        ps.argmax[o] = best_idx;
      }
    }
  }
  if (saved) *saved = std::move(ps);
  return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out, const std::any& saved, ParamGrads*) const {
  const auto& ps = std::any_cast<const PoolSaved&>(saved);
  Tensor dx(ps.in_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) dx[ps.argmax[o]] += grad_out[o];
  return dx;
}

// ---------------------------------------------------------------- AdaptiveAvgPool2d

namespace {
int bin_start(int i, int in, int out) { return (i * in) / out; }
int bin_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }
}  // namespace

Shape AdaptiveAvgPool2d::output_shape(const Shape& in) const {
  if (in.size() != 3) throw ShapeError("avgpool: bad input " + shape_string(in));
  return {in[0], out_h_, out_w_};
}

Tensor AdaptiveAvgPool2d::forward(const Tensor& x, std::any* saved) const {
  require_chw(x, "avgpool");
  const int c_n = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c_n, out_h_, out_w_});
  for (int c = 0; c < c_n; ++c)
    for (int i = 0; i < out_h_; ++i)
      for (int j = 0; j < out_w_; ++j) {
        const int h0 = bin_start(i, h, out_h_), h1 = bin_end(i, h, out_h_);
        const int w0 = bin_start(j, w, out_w_), w1 = bin_end(j, w, out_w_);
        double acc = 0.0;
        for (int a = h0; a < h1; ++a)
          for (int b = w0; b < w1; ++b) acc += x.at(c, a, b);
        y.at(c, i, j) = acc / static_cast<double>((h1 - h0) * (w1 - w0));
      }
  if (saved) *saved = x.shape();
  return y;
}

Tensor AdaptiveAvgPool2d::backward(const Tensor& grad_out, const std::any& saved,
                                   ParamGrads*) const {
  const auto& in_shape = std::any_cast<const Shape&>(saved);
  const int h = in_shape[1], w = in_shape[2];
  Tensor dx(in_shape);
  for (int c = 0; c < in_shape[0]; ++c)
    for (int i = 0; i < out_h_; ++i)
      for (int j = 0; j < out_w_; ++j) {
        const int h0 = bin_start(i, h, out_h_), h1 = bin_end(i, h, out_h_);
        const int w0 = bin_start(j, w, out_w_), w1 = bin_end(j, w, out_w_);
        const double g = grad_out.at(c, i, j) / static_cast<double>((h1 - h0) * (w1 - w0));
        for (int a = h0; a < h1; ++a)
          for (int b = w0; b < w1; ++b) dx.at(c, a, b) += g;
      }
  return dx;
}

// ---------------------------------------------------------------- Flatten

Shape Flatten::output_shape(const Shape& in) const {
  return {static_cast<int>(shape_volume(in))};
}

Tensor Flatten::forward(const Tensor& x, std::any* saved) const {
  if (saved) *saved = x.shape();
  return x.reshaped({static_cast<int>(x.size())});
}

Tensor Flatten::backward(const Tensor& grad_out, const std::any& saved, ParamGrads*) const {
  return grad_out.reshaped(std::any_cast<const Shape&>(saved));
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in_features, int out_features)
    : in_(in_features), out_(out_features),
      weight_{name + ".weight", Tensor({out_features, in_features})},
      bias_{name + ".bias", Tensor({out_features})} {
  if (in_features <= 0 || out_features <= 0)
    throw std::invalid_argument("linear " + name + ": invalid dimensions");
}

Shape Linear::output_shape(const Shape& in) const {
  if (shape_volume(in) != static_cast<std::size_t>(in_))
    throw ShapeError("linear " + weight_.name + ": bad input " + shape_string(in));
  return {out_};
}

Tensor Linear::forward(const Tensor& x, std::any* saved) const {
  output_shape(x.shape());
  Tensor y({out_});
  VecMap(y.data(), out_).noalias() =
      ConstMatMap(weight_.value.data(), out_, in_) * ConstVecMap(x.data(), in_) +
      ConstVecMap(bias_.value.data(), out_);
  if (saved) *saved = x;
  return y;
}

Tensor Linear::backward(const Tensor& grad_out, const std::any& saved, ParamGrads* grads) const {
  const auto& x = std::any_cast<const Tensor&>(saved);
  ConstVecMap g(grad_out.data(), out_);
  Tensor dx(x.shape());
  VecMap(dx.data(), in_).noalias() = ConstMatMap(weight_.value.data(), out_, in_).transpose() * g;
  if (grads) {
    Tensor& dw = grad_slot(*grads, weight_.value);
    MatMap(dw.data(), out_, in_).noalias() += g * ConstVecMap(x.data(), in_).transpose();
    Tensor& db = grad_slot(*grads, bias_.value);
    VecMap(db.data(), out_) += g;
  }
  return dx;
}

void Linear::collect(std::vector<NamedTensor*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

void Linear::collect(std::vector<const NamedTensor*>& out) const {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(const std::string& name, int channels, double eps)
    : channels_(channels), eps_(eps),
      weight_{name + ".weight", Tensor({channels}, 1.0)},
      bias_{name + ".bias", Tensor({channels})},
      mean_{name + ".running_mean", Tensor({channels}), false},
      var_{name + ".running_var", Tensor({channels}, 1.0), false} {}

std::vector<double> BatchNorm2d::scale() const {
  std::vector<double> s(channels_);
  for (int c = 0; c < channels_; ++c) s[c] = weight_.value[c] / std::sqrt(var_.value[c] + eps_);
  return s;
}

Tensor BatchNorm2d::forward(const Tensor& x, std::any* saved) const {
  require_chw(x, "batchnorm");
  if (x.dim(0) != channels_) throw ShapeError("batchnorm: channel mismatch");
  const auto s = scale();
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor y = x;
  for (int c = 0; c < channels_; ++c) {
    const double shift = bias_.value[c] - mean_.value[c] * s[c];
    double* p = y.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = p[i] * s[c] + shift;
  }
  if (saved) *saved = x;
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out, const std::any& saved,
                             ParamGrads* grads) const {
  const auto& x = std::any_cast<const Tensor&>(saved);
  const auto s = scale();
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor dx = grad_out;
  for (int c = 0; c < channels_; ++c) {
    double* p = dx.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] *= s[c];
  }
  if (grads) {
    Tensor& dw = grad_slot(*grads, weight_.value);
    Tensor& db = grad_slot(*grads, bias_.value);
    for (int c = 0; c < channels_; ++c) {
      const double inv_std = 1.0 / std::sqrt(var_.value[c] + eps_);
      double gw = 0.0, gb = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double g = grad_out[c * plane + i];
        gw += g * (x[c * plane + i] - mean_.value[c]) * inv_std;
        gb += g;
      }
      dw[c] += gw;
      db[c] += gb;
    }
  }
  return dx;
}

void BatchNorm2d::collect(std::vector<NamedTensor*>& out) {
  for (auto* t : {&weight_, &bias_, &mean_, &var_}) out.push_back(t);
}

void BatchNorm2d::collect(std::vector<const NamedTensor*>& out) const {
  for (auto* t : {&weight_, &bias_, &mean_, &var_}) out.push_back(t);
}

// ---------------------------------------------------------------- Sequential

Shape Sequential::output_shape(const Shape& in) const { return output_shape(in, 0, size()); }

Shape Sequential::output_shape(const Shape& in, std::size_t begin, std::size_t end) const {
  Shape s = in;
  for (std::size_t i = begin; i < end; ++i) s = layers_[i]->output_shape(s);
  return s;
}

Tensor Sequential::forward_range(const Tensor& x, std::size_t begin, std::size_t end,
                                 std::vector<std::any>* tape) const {
  if (begin > end || end > layers_.size()) throw std::out_of_range("sequential: bad range");
  if (tape) tape->assign(end - begin, std::any{});
  Tensor cur = x;
  for (std::size_t i = begin; i < end; ++i)
    cur = layers_[i]->forward(cur, tape ? &(*tape)[i - begin] : nullptr);
  return cur;
}

Tensor Sequential::backward_range(const Tensor& grad_out, std::size_t begin, std::size_t end,
                                  const std::vector<std::any>& tape, ParamGrads* grads) const {
  if (tape.size() != end - begin) throw std::logic_error("sequential: tape/range mismatch");
  Tensor g = grad_out;
  for (std::size_t i = end; i-- > begin;) g = layers_[i]->backward(g, tape[i - begin], grads);
  return g;
}

Tensor Sequential::forward(const Tensor& x, std::any* saved) const {
  if (!saved) return forward_range(x, 0, size(), nullptr);
  std::vector<std::any> tape;
  Tensor y = forward_range(x, 0, size(), &tape);
  *saved = std::move(tape);
  return y;
}

Tensor Sequential::backward(const Tensor& grad_out, const std::any& saved,
                            ParamGrads* grads) const {
  return backward_range(grad_out, 0, size(), std::any_cast<const std::vector<std::any>&>(saved),
                        grads);
}

void Sequential::collect(std::vector<NamedTensor*>& out) {
  for (auto& l : layers_) l->collect(out);
}

void Sequential::collect(std::vector<const NamedTensor*>& out) const {
  for (const auto& l : layers_) static_cast<const Layer&>(*l).collect(out);
}

// ---------------------------------------------------------------- Bottleneck

namespace {
struct BottleneckSaved {
  std::any main, down;
  Tensor output;
};
}  // namespace

Bottleneck::Bottleneck(const std::string& prefix, int in_channels, int width, int stride) {
  const int out_channels = width * 4;
  main_.add(std::make_unique<Conv2d>(prefix + ".conv1", in_channels, width, 1, 1, 0, false));
  main_.add(std::make_unique<BatchNorm2d>(prefix + ".bn1", width));
  main_.add(std::make_unique<ReLU>());
  main_.add(std::make_unique<Conv2d>(prefix + ".conv2", width, width, 3, stride, 1, false));
  main_.add(std::make_unique<BatchNorm2d>(prefix + ".bn2", width));
  main_.add(std::make_unique<ReLU>());
  main_.add(std::make_unique<Conv2d>(prefix + ".conv3", width, out_channels, 1, 1, 0, false));
  main_.add(std::make_unique<BatchNorm2d>(prefix + ".bn3", out_channels));
  if (stride != 1 || in_channels != out_channels) {
    downsample_ = std::make_unique<Sequential>();
    downsample_->add(std::make_unique<Conv2d>(prefix + ".downsample.0", in_channels,
                                              out_channels, 1, stride, 0, false));
    downsample_->add(std::make_unique<BatchNorm2d>(prefix + ".downsample.1", out_channels));
  }
}

Shape Bottleneck::output_shape(const Shape& in) const { return main_.output_shape(in); }

Tensor Bottleneck::forward(const Tensor& x, std::any* saved) const {
  BottleneckSaved bs;
  Tensor y = main_.forward(x, saved ? &bs.main : nullptr);
  if (downsample_) {
    y += downsample_->forward(x, saved ? &bs.down : nullptr);
  } else {
    y += x;
  }
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  if (saved) {
    bs.output = y;
    *saved = std::move(bs);
  }
  return y;
}

Tensor Bottleneck::backward(const Tensor& grad_out, const std::any& saved,
                            ParamGrads* grads) const {
  const auto& bs = std::any_cast<const BottleneckSaved&>(saved);
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(bs.output[i] > 0.0)) g[i] = 0.0;
  Tensor dx = main_.backward(g, bs.main, grads);
  if (downsample_) {
    dx += downsample_->backward(g, bs.down, grads);
  } else {
    dx += g;
  }
  return dx;
}

void Bottleneck::collect(std::vector<NamedTensor*>& out) {
  main_.collect(out);
  if (downsample_) downsample_->collect(out);
}

void Bottleneck::collect(std::vector<const NamedTensor*>& out) const {
  static_cast<const Sequential&>(main_).collect(out);
  if (downsample_) static_cast<const Sequential&>(*downsample_).collect(out);
}

}  // namespace lcam::nn
