#include "evaluation/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "masking/masking.hpp"
#include "training/preprocess.hpp"

namespace lcam {

void EvalConfig::validate() const {
  if (nu_list.empty()) throw Error(Errc::invalid_argument, "nu list is empty");
  for (double nu : nu_list)
    if (!(nu > 0.0 && nu <= 100.0))
      throw Error(Errc::invalid_argument, "nu must lie in (0, 100], got " + std::to_string(nu));
  if (sample_count < 1) throw Error(Errc::invalid_argument, "sample count must be >= 1");
}

std::vector<ScoreRecord> EvalReport::scores_for(std::size_t nu_index) const {
  std::vector<ScoreRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.orig, r.masked.at(nu_index)});
  return out;
}

Map2D threshold_top_nu(const Map2D& v, double nu) {
  if (!(nu > 0.0 && nu <= 100.0))
    throw Error(Errc::invalid_argument, "nu must lie in (0, 100]");
  const std::size_t n = v.size();
  // Tolerance absorbs representation error, e.g. 15 * 100 / 100 -> 15.000000000000002.
  const double exact = nu * static_cast<double>(n) / 100.0;
  std::size_t keep = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  keep = std::min(keep, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v.values[a] > v.values[b]; });
  Map2D out(v.rows, v.cols);
  for (std::size_t i = 0; i < keep; ++i) out.values[order[i]] = v.values[order[i]];
  return out;
}

double average_drop(std::span<const ScoreRecord> records, std::size_t* excluded) {
  double sum = 0.0;
  std::size_t used = 0, skipped = 0;
  for (const auto& r : records) {
    if (!(r.orig > 0.0)) {
      ++skipped;
      continue;
    }
    sum += std::max(0.0, r.orig - r.masked) / r.orig;
    ++used;
  }
  if (excluded) *excluded = skipped;
  return used == 0 ? 0.0 : 100.0 * sum / static_cast<double>(used);
}

double increase_confidence(std::span<const ScoreRecord> records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records)
    if (r.masked > r.orig) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

std::vector<std::size_t> select_subset(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (count >= n) return idx;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with an explicit index draw, independent of the
  // standard library's shuffle implementation.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

EvalReport evaluate(const ClassifierSplit& split, const Explainer& explainer,
                    const ImageSource& data, const EvalConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw Error(Errc::invalid_argument, "evaluation set is empty");

  EvalReport report;
  report.method_id = cfg.method_id;
  report.explainer_passes = explainer.passes_per_explanation();
  const std::uint64_t passes_before = split.pass_count();

  for (std::size_t index : select_subset(data.size(), cfg.sample_count, cfg.seed)) {
    const Image x = preprocess_eval(data.load(index), split.preprocess()).image;
    const ClassScores orig = split.classify(x);
    const int y = orig.argmax();
    const SaliencyMap v = explainer.explain(x, y);

    ImageRecord rec{index, y, orig.probs[y], {}};
    for (double nu : cfg.nu_list) {
      const Image masked = apply_mask(x, threshold_top_nu(v.values, nu));
      rec.masked.push_back(split.classify(masked).probs[y]);
    }
    report.records.push_back(std::move(rec));
  }

  for (std::size_t i = 0; i < cfg.nu_list.size(); ++i) {
    const auto scores = report.scores_for(i);
    NuResult r{cfg.nu_list[i], 0.0, 0.0, 0};
    r.ad = average_drop(scores, &r.zero_orig_excluded);
    r.ic = increase_confidence(scores);
    report.per_nu.push_back(r);
  }
  report.total_passes = split.pass_count() - passes_before;
  return report;
}

namespace {

std::string fmt_nu(double nu) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", nu);
  return buf;
}

std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string report_csv(std::span<const EvalReport> reports) {
  if (reports.empty()) return "method\n";
  std::string out = "method";
  for (const auto& r : reports.front().per_nu)
    out += ",AD(" + fmt_nu(r.nu) + "%),IC(" + fmt_nu(r.nu) + "%)";
  out += ",#FW\n";
  for (const auto& rep : reports) {
    out += rep.method_id;
    for (const auto& r : rep.per_nu) out += "," + fmt_value(r.ad) + "," + fmt_value(r.ic);
    out += "," + std::to_string(rep.explainer_passes) + "\n";
  }
  return out;
}

std::string records_csv(const EvalReport& report) {
  std::string out = "method,image_index,label,orig";
  for (const auto& r : report.per_nu) out += ",masked(" + fmt_nu(r.nu) + "%)";
  out += "\n";
  for (const auto& r : report.records) {
    out += report.method_id + "," + std::to_string(r.image_index) + "," + std::to_string(r.label) +
           "," + fmt_score(r.orig);
    for (double m : r.masked) out += "," + fmt_score(m);
    out += "\n";
  }
  return out;
}

}  // namespace lcam
