#include "app/dataset.hpp"

#include <algorithm>
#include <cctype>

#include "evaluation/evaluation.hpp"

namespace fs = std::filesystem;

namespace lcam {

std::string to_string(DatasetLayout l) {
  switch (l) {
    case DatasetLayout::auto_detect: return "auto";
    case DatasetLayout::per_class: return "per_class";
    case DatasetLayout::flat: return "flat";
  }
  return "unknown";
}

DatasetLayout parse_layout(std::string_view text) {
  if (text == "auto") return DatasetLayout::auto_detect;
  if (text == "per_class" || text == "per-class") return DatasetLayout::per_class;
  if (text == "flat") return DatasetLayout::flat;
  throw Error(Errc::invalid_argument,
              "unknown dataset layout '" + std::string(text) + "' (auto|per_class|flat)");
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const char* const kExts[] = {".png", ".jpg", ".jpeg", ".bmp", ".ppm",
                                      ".pgm", ".tif", ".tiff", ".webp"};
  return std::any_of(std::begin(kExts), std::end(kExts), [&](const char* e) { return ext == e; });
}

std::vector<fs::path> sorted_children(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : (e.is_regular_file() && is_image_file(e.path())))
      out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> images_below(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

bool DatasetManifest::has_labels() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.label.has_value(); });
}

std::string DatasetManifest::display_name(std::size_t i) const {
  fs::path rel = entries.at(i).path.lexically_relative(root);
  if (rel.empty()) rel = entries[i].path.filename();
  rel.replace_extension();
  std::string s = rel.generic_string();
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j{{"path", e.path.generic_string()}};
    j["label"] = e.label ? nlohmann::json(*e.label) : nlohmann::json(nullptr);
    files.push_back(std::move(j));
  }
  nlohmann::json skip = nlohmann::json::array();
  for (const auto& s : skipped) skip.push_back({{"path", s.path.generic_string()}, {"reason", s.reason}});
  return {{"root", root.generic_string()},
          {"layout", to_string(layout)},
          {"classes", class_names},
          {"files", files},
          {"skipped", skip},
          {"subset_size", subset.size ? nlohmann::json(*subset.size) : nlohmann::json(nullptr)},
          {"subset_seed", subset.seed}};
}

DatasetManifest ingest_dataset(const fs::path& root, DatasetLayout layout, const SubsetSpec& subset,
                               bool verify_decode) {
  std::error_code ec;
  if (!fs::is_directory(root, ec))
    throw Error(Errc::not_found, "dataset directory not found: " + root.string());

  DatasetManifest m;
  m.root = root;
  m.subset = subset;
  const auto class_dirs = sorted_children(root, true);
  if (layout == DatasetLayout::auto_detect)
    layout = class_dirs.empty() ? DatasetLayout::flat : DatasetLayout::per_class;
  m.layout = layout;

  std::vector<DatasetEntry> candidates;
  if (layout == DatasetLayout::per_class) {
    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
      m.class_names.push_back(class_dirs[c].filename().string());
      for (const auto& f : sorted_children(class_dirs[c], false))
        candidates.push_back({f, static_cast<int>(c)});
    }
  } else {
    for (const auto& f : images_below(root)) candidates.push_back({f, std::nullopt});
  }

  for (auto& c : candidates) {
    if (verify_decode) {
      try {
        (void)decode_image(c.path);
      } catch (const Error& e) {
        m.skipped.push_back({c.path, e.what()});
        continue;
      }
    }
    m.entries.push_back(std::move(c));
  }
  if (m.entries.empty())
    throw Error(Errc::invalid_argument, "no decodable images under " + root.string());

  if (subset.size) {
    std::vector<DatasetEntry> picked;
    for (std::size_t i : select_subset(m.entries.size(), *subset.size, subset.seed))
      picked.push_back(m.entries[i]);
    m.entries = std::move(picked);
  }
  return m;
}

RawImage ManifestImages::load(std::size_t index) const {
  return decode_image(manifest_.entries.at(index).path);
}

}  // namespace lcam
