#include "app/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lcam {

std::vector<std::string> preset_names() { return {"vgg16-paper", "resnet50-paper", "tinycnn-desk"}; }

RunConfig preset(std::string_view name) {
  RunConfig c;
  c.preset = std::string(name);
  TrainConfig& t = c.train;
  t.variant = Variant::img;
  t.batch_size = 64;
  t.lr = 1e-4;
  t.loss_weights = LossWeights{};
  t.split_point = SplitPoint::last_conv;
  if (name == "vgg16-paper") {
    c.model_id = "vgg16";
    t.lr_decay_per_epoch = 0.75;
    t.epochs = 7;
  } else if (name == "resnet50-paper") {
    c.model_id = "resnet50";
    t.lr_decay_per_epoch = 0.95;
    t.epochs = 25;
  } else if (name == "tinycnn-desk") {
    // Small dataset, few steps: a larger step size than the ImageNet recipe.
    c.model_id = "tinycnn";
    t.batch_size = 16;
    t.lr = 0.05;
    t.lr_decay_per_epoch = 0.9;
    t.epochs = 5;
  } else {
    throw Error(Errc::invalid_argument, "unknown preset '" + std::string(name) + "'");
  }
  return c;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error(Errc::invalid_argument, "bad value for " + key + ": '" + v + "'");
  return out;
}

}  // namespace

Settings parse_settings(std::string_view text, const std::string& origin) {
  Settings s;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::invalid_argument,
                  origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty())
      throw Error(Errc::invalid_argument, origin + ":" + std::to_string(lineno) + ": empty key");
    s[std::move(key)] = std::move(value);
  }
  return s;
}

Settings read_settings_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::not_found, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_settings(ss.str(), path.string());
}

void apply_settings(RunConfig& cfg, const Settings& s) {
  TrainConfig& t = cfg.train;
  for (const auto& [key, v] : s) {
    if (key == "preset") continue;  // handled by resolve_run_config
    if (key == "model") cfg.model_id = v;
    else if (key == "variant") t.variant = parse_variant(v);
    else if (key == "batch_size") t.batch_size = parse_number<int>(key, v);
    else if (key == "lr") t.lr = parse_number<double>(key, v);
    else if (key == "lr_decay_per_epoch") t.lr_decay_per_epoch = parse_number<double>(key, v);
    else if (key == "epochs") t.epochs = parse_number<int>(key, v);
    else if (key == "lambda1") t.loss_weights.lambda1 = parse_number<double>(key, v);
    else if (key == "lambda2") t.loss_weights.lambda2 = parse_number<double>(key, v);
    else if (key == "lambda3") t.loss_weights.lambda3 = parse_number<double>(key, v);
    else if (key == "lambda4") t.loss_weights.lambda4 = parse_number<double>(key, v);
    else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "split_point") t.split_point = parse_split_point(v);
    else throw Error(Errc::invalid_argument, "unknown config key '" + key + "'");
  }
}

RunConfig resolve_run_config(const Settings& file, const Settings& flags) {
  std::string name = "vgg16-paper";
  if (auto it = file.find("preset"); it != file.end()) name = it->second;
  if (auto it = flags.find("preset"); it != flags.end()) name = it->second;
  RunConfig cfg = preset(name);
  apply_settings(cfg, file);
  apply_settings(cfg, flags);
  cfg.train.validate();
  return cfg;
}

std::string format_settings(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  char buf[1024];
  std::snprintf(buf, sizeof(buf),
                "preset = %s\nmodel = %s\nvariant = %s\nbatch_size = %d\nlr = %.17g\n"
                "lr_decay_per_epoch = %.17g\nepochs = %d\nlambda1 = %.17g\nlambda2 = %.17g\n"
                "lambda3 = %.17g\nlambda4 = %.17g\nseed = %llu\nsplit_point = %s\n",
                cfg.preset.c_str(), cfg.model_id.c_str(), to_string(t.variant).c_str(),
                t.batch_size, t.lr, t.lr_decay_per_epoch, t.epochs, t.loss_weights.lambda1,
                t.loss_weights.lambda2, t.loss_weights.lambda3, t.loss_weights.lambda4,
                static_cast<unsigned long long>(t.seed), to_string(t.split_point).c_str());
  return buf;
}

}  // namespace lcam
