#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "backbone/backbone.hpp"
#include "core/raw_image.hpp"
#include "inference/inference.hpp"

namespace lcam {

struct EvalConfig {
  std::vector<double> nu_list{100.0, 50.0, 15.0};
  std::size_t sample_count = 2000;
  std::uint64_t seed = 0;
  std::string method_id = "L-CAM";

  void validate() const;
};

// Model-truth-class probabilities before and after masking.
struct ScoreRecord {
  double orig = 0.0;
  double masked = 0.0;
};

struct ImageRecord {
  std::size_t image_index = 0;
  int label = 0;
  double orig = 0.0;
  std::vector<double> masked;  // one per nu, same order as EvalConfig::nu_list
};

struct NuResult {
  double nu = 0.0;
  double ad = 0.0;
  double ic = 0.0;
  std::size_t zero_orig_excluded = 0;
};

struct EvalReport {
  std::string method_id;
  int explainer_passes = 0;  // "#FW"
  std::vector<NuResult> per_nu;
  std::vector<ImageRecord> records;
  std::uint64_t total_passes = 0;

  // Score pairs for the i-th nu, in record order.
  std::vector<ScoreRecord> scores_for(std::size_t nu_index) const;
};

// Keeps the ceil(nu * N / 100) largest values; ties go to the lower row-major index.
Map2D threshold_top_nu(const Map2D& v, double nu);

// Mean relative confidence drop in percent. Records with orig <= 0 are skipped
// and counted in *excluded when given.
double average_drop(std::span<const ScoreRecord> records, std::size_t* excluded = nullptr);
// Percentage of records whose masked score strictly exceeds the original.
double increase_confidence(std::span<const ScoreRecord> records);

// Sorted indices of a seeded random subset (all indices when count >= n).
std::vector<std::size_t> select_subset(std::size_t n, std::size_t count, std::uint64_t seed);

EvalReport evaluate(const ClassifierSplit& split, const Explainer& explainer,
                    const ImageSource& data, const EvalConfig& cfg);

// One row per report, columns method, AD(nu%), IC(nu%) ..., #FW.
std::string report_csv(std::span<const EvalReport> reports);
std::string records_csv(const EvalReport& report);

}  // namespace lcam
