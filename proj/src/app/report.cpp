#include "app/report.hpp"

#include "core/archive.hpp"
#include "training/preprocess.hpp"

namespace lcam {

std::vector<Misclassification> report_misclassifications(const ClassifierSplit& split,
                                                         const Explainer& explainer,
                                                         const DatasetManifest& manifest,
                                                         const std::filesystem::path& out_dir) {
  if (!manifest.has_labels())
    throw Error(Errc::invalid_argument,
                "misclassification report needs ground-truth classes (directory-per-class layout)");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<Misclassification> out;
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const int gt = *manifest.entries[i].label;
    if (gt >= split.num_classes())
      throw Error(Errc::invalid_argument, "ground-truth class " + std::to_string(gt) +
                                              " exceeds the classifier's " +
                                              std::to_string(split.num_classes()) + " classes");
    const Preprocessed p = preprocess_eval(manifest.entries[i].path, split.preprocess());
    const ClassScores scores = split.classify(p.image);
    const int pred = scores.argmax();
    if (pred == gt) continue;

    Misclassification m;
    m.image = manifest.display_name(i);
    m.ground_truth = gt;
    m.predicted = pred;
    m.confidence = scores.probs[pred];
    m.gt_overlay =
        export_overlay(p.view, explainer.explain(p.image, gt), out_dir,
                       m.image + "_gt" + std::to_string(gt)).png;
    m.pred_overlay =
        export_overlay(p.view, explainer.explain(p.image, pred), out_dir,
                       m.image + "_pred" + std::to_string(pred)).png;
    index.push_back({{"image", manifest.entries[i].path.generic_string()},
                     {"name", m.image},
                     {"ground_truth", gt},
                     {"predicted", pred},
                     {"confidence", m.confidence},
                     {"gt_overlay", m.gt_overlay.filename().string()},
                     {"pred_overlay", m.pred_overlay.filename().string()}});
    out.push_back(std::move(m));
  }
  write_text_atomic(out_dir / "index.json",
                    nlohmann::json{{"method", explainer.method_id()},
                                   {"classes", manifest.class_names},
                                   {"misclassified", index}}
                            .dump(2) +
                        "\n");
  return out;
}

}  // namespace lcam
