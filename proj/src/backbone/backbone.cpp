#include "backbone/backbone.hpp"

#include <cmath>
#include <random>

#include "core/archive.hpp"
#include "core/digest.hpp"

namespace lcam {

using nlohmann::json;

std::string to_string(SplitPoint sp) {
  return sp == SplitPoint::last_conv ? "last_conv" : "after_last_maxpool";
}

SplitPoint parse_split_point(std::string_view text) {
  if (text == "last_conv") return SplitPoint::last_conv;
  if (text == "after_last_maxpool" || text == "post_pool") return SplitPoint::after_last_maxpool;
  throw Error(Errc::invalid_argument, "unknown split point '" + std::string(text) +
                                          "' (expected last_conv or post_pool)");
}

// ---------------------------------------------------------------- ArchSpec

json ArchSpec::to_json() const {
  return json{{"model_id", model_id},
              {"input", input},
              {"layers", layers},
              {"preprocess",
               {{"resize_shorter", preprocess.resize_shorter},
                {"crop", preprocess.crop},
                {"mean", preprocess.mean},
                {"std", preprocess.stddev}}}};
}

ArchSpec ArchSpec::from_json(const json& j) {
  ArchSpec a;
  try {
    a.model_id = j.at("model_id");
    a.input = j.at("input").get<Shape>();
    a.layers = j.at("layers");
    const auto& p = j.at("preprocess");
    a.preprocess.resize_shorter = p.at("resize_shorter");
    a.preprocess.crop = p.at("crop");
    a.preprocess.mean = p.at("mean");
    a.preprocess.stddev = p.at("std");
  } catch (const json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed architecture description: ") + e.what());
  }
  if (a.input.size() != 3) throw Error(Errc::corrupt, "architecture input must be CxHxW");
  return a;
}

namespace {

json conv(const std::string& name, int in, int out, int kernel, int stride, int pad,
          bool bias = true) {
  return {{"type", "conv"}, {"name", name},     {"in", in},  {"out", out},
          {"kernel", kernel}, {"stride", stride}, {"pad", pad}, {"bias", bias}};
}
json relu() { return {{"type", "relu"}}; }
json maxpool(int k, int s, int p = 0) {
  return {{"type", "maxpool"}, {"kernel", k}, {"stride", s}, {"pad", p}};
}
json avgpool(int h, int w) { return {{"type", "avgpool"}, {"out_h", h}, {"out_w", w}}; }
json flatten() { return {{"type", "flatten"}}; }
json linear(const std::string& name, int in, int out) {
  return {{"type", "linear"}, {"name", name}, {"in", in}, {"out", out}};
}

ArchSpec vgg16_arch() {
  ArchSpec a;
  a.model_id = "vgg16";
  a.input = {3, 224, 224};
  // Torchvision indexing of `features` is preserved in parameter names.
  const int cfg[] = {64, 64, -1, 128, 128, -1, 256, 256, 256, -1, 512, 512, 512, -1,
                     512, 512, 512, -1};
  int in = 3, idx = 0;
  for (int c : cfg) {
    if (c < 0) {
      a.layers.push_back(maxpool(2, 2));
      idx += 1;
    } else {
      a.layers.push_back(conv("features." + std::to_string(idx), in, c, 3, 1, 1));
      a.layers.push_back(relu());
      in = c;
      idx += 2;
    }
  }
  a.layers.push_back(avgpool(7, 7));
  a.layers.push_back(flatten());
  a.layers.push_back(linear("classifier.0", 512 * 7 * 7, 4096));
  a.layers.push_back(relu());
  a.layers.push_back(linear("classifier.3", 4096, 4096));
  a.layers.push_back(relu());
  a.layers.push_back(linear("classifier.6", 4096, 1000));
  return a;
}

ArchSpec resnet50_arch() {
  ArchSpec a;
  a.model_id = "resnet50";
  a.input = {3, 224, 224};
  a.layers.push_back(conv("conv1", 3, 64, 7, 2, 3, false));
  a.layers.push_back({{"type", "batchnorm"}, {"name", "bn1"}, {"channels", 64}});
  a.layers.push_back(relu());
  a.layers.push_back(maxpool(3, 2, 1));
  const int blocks[] = {3, 4, 6, 3};
  const int widths[] = {64, 128, 256, 512};
  int in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    for (int b = 0; b < blocks[stage]; ++b) {
      const int stride = (stage > 0 && b == 0) ? 2 : 1;
      a.layers.push_back({{"type", "bottleneck"},
                          {"name", "layer" + std::to_string(stage + 1) + "." + std::to_string(b)},
                          {"in", in},
                          {"width", widths[stage]},
                          {"stride", stride}});
      in = widths[stage] * 4;
    }
  }
  a.layers.push_back(avgpool(1, 1));
  a.layers.push_back(flatten());
  a.layers.push_back(linear("fc", 2048, 1000));
  return a;
}

bool is_conv_like(const json& layer) {
  const std::string t = layer.at("type");
  return t == "conv" || t == "bottleneck";
}

nn::LayerPtr make_layer(const json& l) {
  const std::string t = l.at("type");
  if (t == "conv")
    return std::make_unique<nn::Conv2d>(l.at("name"), l.at("in"), l.at("out"), l.at("kernel"),
                                        l.value("stride", 1), l.value("pad", 0),
                                        l.value("bias", true));
  if (t == "relu") return std::make_unique<nn::ReLU>();
  if (t == "maxpool")
    return std::make_unique<nn::MaxPool2d>(l.at("kernel"), l.at("stride"), l.value("pad", 0));
  if (t == "avgpool") return std::make_unique<nn::AdaptiveAvgPool2d>(l.at("out_h"), l.at("out_w"));
  if (t == "flatten") return std::make_unique<nn::Flatten>();
  if (t == "linear") return std::make_unique<nn::Linear>(l.at("name"), l.at("in"), l.at("out"));
  if (t == "batchnorm") return std::make_unique<nn::BatchNorm2d>(l.at("name"), l.at("channels"));
  if (t == "bottleneck")
    return std::make_unique<nn::Bottleneck>(l.at("name"), l.at("in"), l.at("width"),
                                            l.at("stride"));
  throw Error(Errc::invalid_argument, "unknown layer type '" + t + "'");
}

}  // namespace

ArchSpec tiny_cnn_arch(const TinyCnnSpec& spec, std::string model_id) {
  if (spec.input_size < 4 || spec.input_size % 4 != 0)
    throw Error(Errc::invalid_argument, "tiny cnn input size must be a positive multiple of 4");
  ArchSpec a;
  a.model_id = std::move(model_id);
  a.input = {3, spec.input_size, spec.input_size};
  a.preprocess.resize_shorter = spec.input_size;
  a.preprocess.crop = spec.input_size;
  a.preprocess.mean = {0.5, 0.5, 0.5};
  a.preprocess.stddev = {0.25, 0.25, 0.25};
  a.layers.push_back(conv("conv1", 3, spec.conv1_channels, 3, 1, 1));
  a.layers.push_back(relu());
  a.layers.push_back(maxpool(2, 2));
  a.layers.push_back(conv("conv2", spec.conv1_channels, spec.conv2_channels, 3, 1, 1));
  a.layers.push_back(relu());
  a.layers.push_back(maxpool(2, 2));
  a.layers.push_back(avgpool(1, 1));
  a.layers.push_back(flatten());
  a.layers.push_back(linear("fc", spec.conv2_channels, spec.num_classes));
  return a;
}

ArchSpec builtin_arch(std::string_view model_id) {
  if (model_id == "vgg16") return vgg16_arch();
  if (model_id == "resnet50") return resnet50_arch();
  if (model_id == "tinycnn") return tiny_cnn_arch(TinyCnnSpec{});
  throw Error(Errc::invalid_argument, "unknown model_id '" + std::string(model_id) +
                                          "' (built-in: vgg16, resnet50, tinycnn)");
}

std::unique_ptr<nn::Sequential> build_network(const ArchSpec& arch) {
  auto net = std::make_unique<nn::Sequential>();
  try {
    for (const auto& l : arch.layers) net->add(make_layer(l));
  } catch (const json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed layer record: ") + e.what());
  }
  net->output_shape(arch.input);  // validates the chain
  return net;
}

void init_random(nn::Sequential& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<nn::NamedTensor*> params;
  net.collect(params);
  for (auto* p : params) {
    const auto& name = p->name;
    const bool is_weight = name.size() >= 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
    if (is_weight && p->value.rank() >= 2) {
      const std::size_t fan_in = p->value.size() / static_cast<std::size_t>(p->value.dim(0));
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (double& v : p->value.values()) v = dist(rng);
    } else if (is_weight || name.ends_with(".running_var")) {
      p->value.fill(1.0);
    } else {
      p->value.fill(0.0);
    }
  }
}

std::size_t find_split_index(const ArchSpec& arch, SplitPoint sp) {
  const auto& layers = arch.layers;
  std::size_t last_conv = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (is_conv_like(layers[i])) last_conv = i;
  if (last_conv == layers.size())
    throw Error(Errc::invalid_argument,
                "architecture '" + arch.model_id + "' has no convolutional layer");

  std::size_t idx = last_conv + 1;
  while (idx < layers.size() &&
         (layers[idx].at("type") == "relu" || layers[idx].at("type") == "batchnorm"))
    ++idx;
  if (sp == SplitPoint::last_conv) return idx;

  if (idx < layers.size() && layers[idx].at("type") == "maxpool") return idx + 1;
  throw Error(Errc::invalid_argument, "split point after_last_maxpool is undefined for '" +
                                          arch.model_id +
                                          "' (no max pooling after its last conv layer)");
}

std::string parameter_digest(const nn::Sequential& net) {
  std::vector<const nn::NamedTensor*> params;
  net.collect(params);
  Sha256 h;
  for (const auto* p : params) {
    h.update(p->name);
    h.update(shape_string(p->value.shape()));
    h.update(p->value.data(), p->value.size() * sizeof(double));
  }
  return h.hex_digest();
}

void save_weights(const std::filesystem::path& path, const ArchSpec& arch,
                  const nn::Sequential& net) {
  Archive ar;
  ar.meta = {{"kind", "backbone_weights"}, {"model_id", arch.model_id}, {"arch", arch.to_json()}};
  std::vector<const nn::NamedTensor*> params;
  net.collect(params);
  for (const auto* p : params) ar.arrays.emplace_back(p->name, p->value);
  write_archive(path, ar);
}

// ---------------------------------------------------------------- ClassifierSplit

ClassifierSplit::ClassifierSplit(ArchSpec arch, std::unique_ptr<nn::Sequential> net,
                                 SplitPoint split_point)
    : arch_(std::move(arch)), net_(std::move(net)), split_point_(split_point) {
  split_index_ = find_split_index(arch_, split_point_);
  feature_shape_ = net_->output_shape(arch_.input, 0, split_index_);
  if (feature_shape_.size() != 3)
    throw Error(Errc::invalid_argument, "split does not produce KxPxQ feature maps");
  const Shape out = net_->output_shape(feature_shape_, split_index_, net_->size());
  if (out.size() != 1) throw Error(Errc::invalid_argument, "classifier must end in a vector");
  num_classes_ = out[0];
  frozen_digest_ = parameter_digest(*net_);
}

FeatureMaps ClassifierSplit::features(const Image& x, std::vector<std::any>* tape) const {
  if (x.pixels.shape() != arch_.input)
    throw ShapeError("image shape " + shape_string(x.pixels.shape()) + " does not match " +
                     arch_.model_id + " input " + shape_string(arch_.input));
  passes_.fetch_add(1);
  return FeatureMaps(net_->forward_range(x.pixels, 0, split_index_, tape));
}

ClassScores ClassifierSplit::head(const FeatureMaps& a, std::vector<std::any>* tape) const {
  if (a.values.shape() != feature_shape_)
    throw ShapeError("feature maps " + shape_string(a.values.shape()) + " do not match split " +
                     shape_string(feature_shape_));
  Tensor logits = net_->forward_range(a.values, split_index_, net_->size(), tape);
  return ClassScores::from_logits(std::move(logits.storage()));
}

ClassScores ClassifierSplit::classify(const Image& x) const {
  if (x.pixels.shape() != arch_.input)
    throw ShapeError("image shape " + shape_string(x.pixels.shape()) + " does not match " +
                     arch_.model_id + " input");
  passes_.fetch_add(1);
  Tensor logits = net_->forward_range(x.pixels, 0, net_->size(), nullptr);
  return ClassScores::from_logits(std::move(logits.storage()));
}

FeatureMaps ClassifierSplit::head_backward(const std::vector<double>& grad_logits,
                                           const std::vector<std::any>& tape) const {
  Tensor g({num_classes_}, grad_logits);
  return FeatureMaps(net_->backward_range(g, split_index_, net_->size(), tape, nullptr));
}

Image ClassifierSplit::features_backward(const FeatureMaps& grad_features,
                                         const std::vector<std::any>& tape) const {
  return Image(net_->backward_range(grad_features.values, 0, split_index_, tape, nullptr));
}

// ---------------------------------------------------------------- factory

namespace {

void load_parameters(nn::Sequential& net, const Archive& ar) {
  std::vector<nn::NamedTensor*> params;
  net.collect(params);
  for (auto* p : params) {
    if (!ar.has(p->name))
      throw Error(Errc::corrupt, "weights file lacks parameter '" + p->name + "'");
    const Tensor& src = ar.array(p->name);
    if (src.size() != p->value.size())
      throw Error(Errc::corrupt, "parameter '" + p->name + "' has shape " +
                                     shape_string(src.shape()) + ", expected " +
                                     shape_string(p->value.shape()));
    p->value = src.reshaped(p->value.shape());
  }
}

}  // namespace

std::unique_ptr<ClassifierSplit> split_classifier(std::string_view model_id, SplitPoint sp,
                                                  const WeightSource& weights) {
  if (const auto* rw = std::get_if<RandomWeights>(&weights)) {
    ArchSpec arch = builtin_arch(model_id);
    auto net = build_network(arch);
    init_random(*net, rw->seed);
    return std::make_unique<ClassifierSplit>(std::move(arch), std::move(net), sp);
  }
  const auto& file = std::get<WeightFile>(weights);
  const Archive ar = read_archive(file.path);
  const std::string file_model = ar.meta.value("model_id", "");
  if (file_model != model_id)
    throw Error(Errc::invalid_argument, "weights file " + file.path.string() + " holds '" +
                                            file_model + "', requested '" +
                                            std::string(model_id) + "'");
  ArchSpec arch = ar.meta.contains("arch") ? ArchSpec::from_json(ar.meta.at("arch"))
                                           : builtin_arch(model_id);
  auto net = build_network(arch);
  load_parameters(*net, ar);
  return std::make_unique<ClassifierSplit>(std::move(arch), std::move(net), sp);
}

ModelTruth model_truth_label(const ClassifierSplit& split, const Image& x) {
  const ClassScores s = split.head(split.features(x));
  const int y = s.argmax();
  return {y, s.probs[static_cast<std::size_t>(y)]};
}

}  // namespace lcam
