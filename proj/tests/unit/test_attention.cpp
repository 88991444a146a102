#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "attention/attention_cam.hpp"
#include "fixtures.hpp"

using namespace lcam;

namespace {

FeatureMaps random_features(std::mt19937_64& rng, int k, int p, int q) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMaps a(Tensor({k, p, q}));
  for (double& v : a.values.values()) v = n(rng);
  return a;
}

}  // namespace

TEST_CASE("init_params ranges, shape and determinism") {
  const AttentionParams p = init_params(3, 4, 0);
  CHECK(p.weights.size() == 12);
  CHECK(std::all_of(p.weights.begin(), p.weights.end(), [](double w) { return std::abs(w) <= 0.25; }));
  CHECK(std::all_of(p.bias.begin(), p.bias.end(), [](double b) { return b == 0.0; }));
  CHECK(init_params(3, 4, 0) == p);
  CHECK_FALSE(init_params(3, 4, 1) == p);
  const AttentionParams big = init_params(1000, 512, 0);
  CHECK(big.weights.size() == 1000u * 512u);
  CHECK(big.bias.size() == 1000u);
  CHECK_THROWS_AS(init_params(0, 4, 0), Error);
  CHECK_THROWS_AS(init_params(3, -1, 0), Error);
}

TEST_CASE("compute_cam hand examples") {
  AttentionParams p(1, 2);
  p.weights = {1.0, -1.0};
  p.bias = {0.5};
  const FeatureMaps a(Tensor({2, 1, 1}, std::vector<double>{2.0, 3.0}));
  const Cam cam = compute_cam(p, 0, a);
  CHECK(cam.values.rows == 1);
  CHECK(cam.values(0, 0) == -0.5);
  CHECK(cam.class_index == 0);

  std::mt19937_64 rng(1);
  const FeatureMaps b = random_features(rng, 3, 4, 5);
  AttentionParams onehot(2, 3);
  onehot.row(1)[2] = 1.0;
  const Cam picked = compute_cam(onehot, 1, b);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 5; ++c) CHECK(picked.values(r, c) == b.values.at(2, r, c));

  CHECK_THROWS_AS(compute_cam(onehot, 2, b), Error);
  CHECK_THROWS_AS(compute_cam(onehot, -1, b), Error);
  CHECK_THROWS_AS(compute_cam(onehot, 0, random_features(rng, 4, 4, 5)), ShapeError);
}

TEST_CASE("resnet-sized CAM") {
  std::mt19937_64 rng(2);
  const FeatureMaps a = random_features(rng, 2048, 7, 7);
  const Cam cam = compute_cam(init_params(1000, 2048, 3), 417, a);
  CHECK(cam.values.rows == 7);
  CHECK(cam.values.cols == 7);
}

TEST_CASE("compute_cam is linear in the weights") {
  std::mt19937_64 rng(3);
  const FeatureMaps a = random_features(rng, 5, 3, 4);
  AttentionParams w1 = init_params(2, 5, 10), w2 = init_params(2, 5, 11), mix(2, 5);
  const double alpha = 0.7, beta = -1.9;
  for (std::size_t i = 0; i < mix.weights.size(); ++i)
    mix.weights[i] = alpha * w1.weights[i] + beta * w2.weights[i];
  const Cam l1 = compute_cam(w1, 1, a), l2 = compute_cam(w2, 1, a), lm = compute_cam(mix, 1, a);
  for (std::size_t i = 0; i < lm.values.size(); ++i)
    CHECK(lm.values.values[i] ==
          doctest::Approx(alpha * l1.values.values[i] + beta * l2.values.values[i]).epsilon(1e-9));
}

TEST_CASE("class-specific CAMs differ") {
  std::mt19937_64 rng(4);
  const FeatureMaps a = random_features(rng, 6, 5, 5);
  const AttentionParams p = init_params(4, 6, 7);
  const Cam c0 = compute_cam(p, 0, a), c3 = compute_cam(p, 3, a);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < c0.values.size(); ++i)
    max_diff = std::max(max_diff, std::abs(c0.values.values[i] - c3.values.values[i]));
  CHECK(max_diff > 0.0);
}

TEST_CASE("sigmoid values") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-1.0) == doctest::Approx(0.2689414213699951).epsilon(1e-15));
  CHECK(std::abs(sigmoid(100.0) - 1.0) < 1e-10);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));

  Cam zeros{Map2D(3, 2), 0};
  const NormalizedCam half = sigmoid_normalize(zeros);
  CHECK(std::all_of(half.values.values.begin(), half.values.values.end(),
                    [](double v) { return v == 0.5; }));
}

TEST_CASE("sigmoid_normalize keeps the ordering and the (0,1) range") {
  std::mt19937_64 rng(5);
  Cam cam{lcam::testing::random_map(rng, 6, 6, -8.0, 8.0), 0};
  const NormalizedCam s = sigmoid_normalize(cam);
  auto argsort = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    return idx;
  };
  CHECK(argsort(cam.values.values) == argsort(s.values.values));
  for (double v : s.values.values) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("accumulate_cam_gradient matches finite differences") {
  std::mt19937_64 rng(6);
  const FeatureMaps a = random_features(rng, 4, 3, 3);
  AttentionParams p = init_params(3, 4, 1);
  const Map2D probe = lcam::testing::random_map(rng, 3, 3, -1.0, 1.0);
  const int y = 2;
  auto objective = [&] {
    const Cam l = compute_cam(p, y, a);
    double s = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) s += probe.values[i] * l.values.values[i];
    return s;
  };
  AttentionParams grad(3, 4);
  accumulate_cam_gradient(a, y, probe, grad);
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const double keep = p.weights[i];
    p.weights[i] = keep + h;
    const double up = objective();
    p.weights[i] = keep - h;
    const double down = objective();
    p.weights[i] = keep;
    CHECK(grad.weights[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
  }
  for (int r = 0; r < 3; ++r) {
    const double keep = p.bias[r];
    p.bias[r] = keep + h;
    const double up = objective();
    p.bias[r] = keep - h;
    const double down = objective();
    p.bias[r] = keep;
    CHECK(grad.bias[r] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
  }
  // Only the selected row receives gradient.
  for (int k = 0; k < 4; ++k) CHECK(grad.row(0)[k] == 0.0);
}
