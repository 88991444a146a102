#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "app/checkpoint.hpp"
#include "app/config.hpp"
#include "app/dataset.hpp"
#include "app/report.hpp"
#include "fixtures.hpp"
#include "inference/inference.hpp"
#include "training/preprocess.hpp"

using namespace lcam;
using lcam::testing::random_raw;
using lcam::testing::TempDir;
using lcam::testing::tiny_split;

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

void put_png(const fs::path& p, const RawImage& img) {
  fs::create_directories(p.parent_path());
  write_png(p, img);
}

Checkpoint trained_like(const ClassifierSplit& split, std::uint64_t seed) {
  Checkpoint c;
  c.params = init_params(split.num_classes(), split.feature_shape()[0], seed);
  c.params.bias[0] = 0.1234567890123;
  c.config.seed = seed;
  c.config.split_point = split.split_point();
  c.epoch = 3;
  c.model_id = split.model_id();
  c.frozen_digest = split.frozen_digest();
  c.log_digest = std::string(64, 'a');
  return c;
}

void expect_code(Errc code, auto&& fn) {
  try {
    fn();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_CASE("dataset ingestion") {
  TempDir dir;
  std::mt19937_64 rng(1);
  for (const char* cls : {"cat", "ant", "bee"})
    for (const char* f : {"b.png", "a.png"}) put_png(dir / "tree" / cls / f, random_raw(rng, 5, 4));

  const DatasetManifest m = ingest_dataset(dir / "tree");
  CHECK(m.layout == DatasetLayout::per_class);
  CHECK(m.class_names == std::vector<std::string>{"ant", "bee", "cat"});
  REQUIRE(m.entries.size() == 6);
  CHECK(m.has_labels());
  CHECK(m.entries[0].path.filename() == "a.png");
  CHECK(*m.entries[0].label == 0);
  CHECK(*m.entries[5].label == 2);
  CHECK(m.display_name(5) == "cat_b");

  const SubsetSpec sub{4, 7};
  const DatasetManifest s1 = ingest_dataset(dir / "tree", DatasetLayout::auto_detect, sub);
  const DatasetManifest s2 = ingest_dataset(dir / "tree", DatasetLayout::auto_detect, sub);
  REQUIRE(s1.entries.size() == 4);
  CHECK(s1.to_json() == s2.to_json());

  for (const char* f : {"x.png", "y.png", "nested/z.png"}) put_png(dir / "flat" / f, random_raw(rng, 3, 3));
  write_text(dir / "flat" / "broken.png", "not an image");
  write_text(dir / "flat" / "notes.txt", "ignored");
  // An explicit flat layout also collects images in subdirectories.
  const DatasetManifest flat = ingest_dataset(dir / "flat", DatasetLayout::flat);
  CHECK(flat.layout == DatasetLayout::flat);
  CHECK(flat.entries.size() == 3);
  CHECK_FALSE(flat.has_labels());
  for (const auto& e : flat.entries) CHECK_FALSE(e.label.has_value());
  REQUIRE(flat.skipped.size() == 1);
  CHECK(flat.skipped[0].path.filename() == "broken.png");

  put_png(dir / "loose" / "only.png", random_raw(rng, 3, 3));
  CHECK(ingest_dataset(dir / "loose").layout == DatasetLayout::flat);

  const ManifestImages images(flat);
  CHECK(images.size() == 3);
  CHECK(images.load(0).width == 3);

  fs::create_directories(dir / "empty");
  expect_code(Errc::invalid_argument, [&] { ingest_dataset(dir / "empty"); });
  expect_code(Errc::not_found, [&] { ingest_dataset(dir / "missing"); });
}

TEST_CASE("checkpoint round trip and guards") {
  TempDir dir;
  const auto split = tiny_split(TinyCnnSpec{8, 4, 6, 3}, 1);
  const Checkpoint c = trained_like(*split, 5);
  save_checkpoint(dir / "c.lcam", c);

  const Checkpoint back = load_checkpoint(dir / "c.lcam", *split);
  CHECK(back.params == c.params);
  CHECK(back.config.to_json() == c.config.to_json());
  CHECK(back.epoch == 3);
  CHECK(back.model_id == c.model_id);
  CHECK(back.frozen_digest == c.frozen_digest);
  CHECK(back.log_digest == c.log_digest);

  const auto other = tiny_split(TinyCnnSpec{8, 4, 6, 3}, 2);
  expect_code(Errc::digest_mismatch, [&] { load_checkpoint(dir / "c.lcam", *other); });

  std::ifstream in(dir / "c.lcam", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  write_text(dir / "t.lcam", bytes.substr(0, bytes.size() - 100));
  expect_code(Errc::corrupt, [&] { load_checkpoint(dir / "t.lcam"); });
  expect_code(Errc::not_found, [&] { load_checkpoint(dir / "none.lcam"); });

  // A plain weight file is not a checkpoint.
  const ArchSpec arch = tiny_cnn_arch(TinyCnnSpec{8, 4, 6, 3}, "w");
  auto net = build_network(arch);
  save_weights(dir / "w.lcw", arch, *net);
  CHECK_THROWS_AS(load_checkpoint(dir / "w.lcw"), Error);
}

TEST_CASE("model cache resolution") {
  TempDir dir;
  setenv("LCAM_MODEL_CACHE", dir.path().c_str(), 1);
  CHECK(model_cache_dir() == dir.path());
  expect_code(Errc::not_found, [&] { resolve_weights("vgg16", std::nullopt); });
  write_text(dir / "vgg16.lcw", "x");
  CHECK(resolve_weights("vgg16", std::nullopt) == dir / "vgg16.lcw");
  CHECK(resolve_weights("vgg16", dir / "vgg16.lcw") == dir / "vgg16.lcw");
  expect_code(Errc::not_found, [&] { resolve_weights("vgg16", dir / "other.lcw"); });
  unsetenv("LCAM_MODEL_CACHE");
}

TEST_CASE("presets carry the published hyperparameters") {
  const RunConfig vgg = preset("vgg16-paper");
  CHECK(vgg.model_id == "vgg16");
  CHECK(vgg.train.batch_size == 64);
  CHECK(vgg.train.lr == 1e-4);
  CHECK(vgg.train.lr_decay_per_epoch == 0.75);
  CHECK(vgg.train.epochs == 7);
  CHECK(vgg.train.loss_weights.lambda1 == 0.01);
  CHECK(vgg.train.loss_weights.lambda2 == 2.0);
  CHECK(vgg.train.loss_weights.lambda3 == 1.5);
  CHECK(vgg.train.loss_weights.lambda4 == 0.3);
  const RunConfig res = preset("resnet50-paper");
  CHECK(res.model_id == "resnet50");
  CHECK(res.train.lr_decay_per_epoch == 0.95);
  CHECK(res.train.epochs == 25);
  CHECK(preset_names().size() == 3);
  expect_code(Errc::invalid_argument, [] { preset("alexnet-paper"); });
}

TEST_CASE("config precedence: flag over file over preset") {
  const Settings file = parse_settings(
      "# three layers\npreset = resnet50-paper\nlr = 0.002   \nepochs = 3\n\nvariant = fm\n", "f.cfg");
  Settings flags;
  flags["epochs"] = "9";
  const RunConfig c = resolve_run_config(file, flags);
  CHECK(c.preset == "resnet50-paper");
  CHECK(c.model_id == "resnet50");
  CHECK(c.train.lr_decay_per_epoch == 0.95);  // preset
  CHECK(c.train.lr == 0.002);                 // file
  CHECK(c.train.epochs == 9);                 // flag
  CHECK(c.train.variant == Variant::fm);

  flags["preset"] = "tinycnn-desk";
  const RunConfig d = resolve_run_config(file, flags);
  CHECK(d.model_id == "tinycnn");
  CHECK(d.train.lr == 0.002);
  CHECK(d.train.batch_size == 16);

  CHECK(resolve_run_config({}, {}).preset == "vgg16-paper");
  const RunConfig again = resolve_run_config(parse_settings(format_settings(c)), {});
  CHECK(format_settings(again) == format_settings(c));

  expect_code(Errc::invalid_argument, [] { parse_settings("no equals sign here"); });
  expect_code(Errc::invalid_argument, [] { resolve_run_config({{"colour", "red"}}, {}); });
  expect_code(Errc::invalid_argument, [] { resolve_run_config({{"lr", "fast"}}, {}); });
  expect_code(Errc::invalid_argument, [] { resolve_run_config({{"lr", "-1"}}, {}); });
}

TEST_CASE("misclassification report") {
  TempDir dir;
  const auto split = tiny_split(TinyCnnSpec{16, 6, 8, 3}, 3);
  const LcamExplainer explainer(*split, trained_like(*split, 1));
  std::mt19937_64 rng(4);

  // File every image under the class the model predicts for it.
  std::vector<std::pair<RawImage, int>> imgs;
  for (int i = 0; i < 9; ++i) {
    RawImage raw = random_raw(rng, 16, 16);
    const int pred = split->classify(preprocess_eval(raw, split->preprocess()).image).argmax();
    imgs.emplace_back(std::move(raw), pred);
  }
  auto write_tree = [&](const fs::path& root, int flip) {
    for (int c = 0; c < 3; ++c) fs::create_directories(root / ("c" + std::to_string(c)));
    for (int i = 0; i < 9; ++i) {
      const int cls = i == flip ? (imgs[i].second + 1) % 3 : imgs[i].second;
      put_png(root / ("c" + std::to_string(cls)) / ("img" + std::to_string(i) + ".png"), imgs[i].first);
    }
  };

  write_tree(dir / "right", -1);
  CHECK(report_misclassifications(*split, explainer, ingest_dataset(dir / "right"), dir / "r0").empty());
  CHECK(fs::exists(dir / "r0" / "index.json"));

  write_tree(dir / "wrong", 4);
  const auto out = report_misclassifications(*split, explainer, ingest_dataset(dir / "wrong"), dir / "r1");
  REQUIRE(out.size() == 1);
  const int gt = (imgs[4].second + 1) % 3, pred = imgs[4].second;
  const std::string stem = "c" + std::to_string(gt) + "_img4";
  CHECK(out[0].image == stem);
  CHECK(out[0].ground_truth == gt);
  CHECK(out[0].predicted == pred);
  CHECK(out[0].gt_overlay.filename() == stem + "_gt" + std::to_string(gt) + ".png");
  CHECK(out[0].pred_overlay.filename() == stem + "_pred" + std::to_string(pred) + ".png");
  CHECK(fs::exists(out[0].gt_overlay));
  CHECK(fs::exists(out[0].pred_overlay));
  std::size_t pngs = 0;
  for (const auto& e : fs::directory_iterator(dir / "r1")) pngs += e.path().extension() == ".png";
  CHECK(pngs == 2);
  std::ifstream idx(dir / "r1" / "index.json");
  const auto j = nlohmann::json::parse(idx);
  CHECK(j["misclassified"].size() == 1);
  CHECK(j["method"] == "L-CAM");

  for (int i = 0; i < 2; ++i) put_png(dir / "flat" / ("f" + std::to_string(i) + ".png"), imgs[i].first);
  expect_code(Errc::invalid_argument,
              [&] { report_misclassifications(*split, explainer, ingest_dataset(dir / "flat"), dir / "r2"); });
}
