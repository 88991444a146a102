#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "app/dataset.hpp"
#include "backbone/backbone.hpp"
#include "inference/inference.hpp"

namespace lcam {

struct Misclassification {
  std::string image;  // display name
  int ground_truth = 0;
  int predicted = 0;
  double confidence = 0.0;
  std::filesystem::path gt_overlay;
  std::filesystem::path pred_overlay;
};

// For every image whose model-truth label differs from its ground truth,
// writes <img>_gt<y1>.png and <img>_pred<y2>.png plus index.json into out_dir.
std::vector<Misclassification> report_misclassifications(const ClassifierSplit& split,
                                                         const Explainer& explainer,
                                                         const DatasetManifest& manifest,
                                                         const std::filesystem::path& out_dir);

}  // namespace lcam
