


#include <cmath>
#include <random>

#include "asr/acoustic.hpp"
#include "asr/error.hpp"
#include "asr/nn/gradcheck.hpp"
#include "asr/nn/ops.hpp"
#include "asr/nn/optim.hpp"
#include "ctc_oracle.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace asr;
using namespace asr::acoustic;

namespace {

std::vector<double> random_rows(std::mt19937_64& rng, std::size_t frames, std::size_t classes) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(frames * classes);
  for (std::size_t t = 0; t < frames; ++t) {
    double z = 0;
    for (std::size_t k = 0; k < classes; ++k) z += p[t * classes + k] = u(rng);
    for (std::size_t k = 0; k < classes; ++k) p[t * classes + k] /= z;
  }
  return p;
}

nn::Tensor log_tensor(const std::vector<double>& probs, std::size_t frames, std::size_t classes, bool grad = false) {
  std::vector<double> l(probs.size());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = std::log(probs[i]);
  return nn::Tensor::from({frames, classes}, l, grad);
}

dsp::FeatureMatrix random_features(std::mt19937_64& rng, std::size_t frames) {
  dsp::FeatureMatrix f(frames, kFeatureDim, dsp::FeatureKind::Stacked39);
  std::normal_distribution<double> n;
  for (auto& v : f.values) v = n(rng);
  return f;
}

}  // namespace

TEST_CASE("ctc loss matches brute-force alignment enumeration") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> frames_d(1, 6), len_d(1, 3);
  int tested = 0;
  while (tested < 60) {
    const std::size_t frames = frames_d(rng), classes = 4;
    std::uniform_int_distribution<int> lab(0, 2);
    phonetics::PhoneSeq target(len_d(rng));
    for (auto& p : target) p = lab(rng);
    if (ctc_min_frames(target) > frames) {
      auto probs = random_rows(rng, frames, classes);
      CHECK_THROWS_AS(ctc_loss(log_tensor(probs, frames, classes), target), DataError);
      continue;
    }
    auto probs = random_rows(rng, frames, classes);
    const double expected = -std::log(testing::brute_ctc_probability(probs, frames, classes, target));
    CHECK(ctc_loss(log_tensor(probs, frames, classes), target).item() == doctest::Approx(expected).epsilon(1e-9));
    ++tested;
  }
}

TEST_CASE("ctc edge cases") {
  // One frame, one label: loss is -log y(label).
  std::vector<double> p{0.2, 0.5, 0.3};
  CHECK(ctc_loss(log_tensor(p, 1, 3), {1}).item() == doctest::Approx(-std::log(0.5)));
  // Repeated label needs a blank between.
  CHECK(ctc_min_frames({1, 1}) == 3);
  CHECK(ctc_min_frames({0, 1, 1, 1}) == 6);
  auto two = random_rows(*std::make_unique<std::mt19937_64>(1), 2, 3);
  CHECK_THROWS_AS(ctc_loss(log_tensor(two, 2, 3), {1, 1}), DataError);
  CHECK_THROWS_AS(ctc_loss(log_tensor(two, 2, 3), {2}), DataError);  // blank as label
  CHECK_THROWS_AS(ctc_loss(log_tensor(two, 2, 3), {}), DataError);
}

TEST_CASE("ctc gradient matches finite differences") {
  std::mt19937_64 rng(3);
  nn::Parameters params;
  params.add("logits", testing::random_tensor(rng, {7, 5}, -2, 2));
  const phonetics::PhoneSeq target{0, 2, 2, 1};
  auto res = nn::grad_check([&] { return ctc_loss(nn::log_softmax(params.at("logits")), target); }, params, 1e-5);
  CHECK(res.max_relative_error < 1e-5);
}

TEST_CASE("acoustic model shapes") {
  auto params = build_acoustic_model({}, 54, 1);
  CHECK(output_classes(params) == 55);
  CHECK(params.at("acoustic.output.weight").shape() == nn::Shape{55, 128});
  CHECK(params.at("acoustic.dense.weight").shape() == nn::Shape{128, 64 * 9});
  CHECK(has_attention(params));
  std::mt19937_64 rng(2);
  auto grid = acoustic_forward(params, random_features(rng, 98));
  CHECK(grid.frames == 24);
  CHECK(grid.classes == 55);
  CHECK(grid.blank() == 54);
  for (std::size_t t = 0; t < grid.frames; ++t) {
    double s = 0;
    for (std::size_t k = 0; k < grid.classes; ++k) {
      CHECK(grid.at(t, k) > 0.0);
      s += grid.at(t, k);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(downsampled_frames(98) == 24);
  CHECK(downsampled_frames(7) == 1);
  CHECK_THROWS_AS(acoustic_forward(params, random_features(rng, 3)), DataError);

  AcousticConfig plain;
  plain.use_attention = false;
  auto p2 = build_acoustic_model(plain, 54, 1);
  CHECK_FALSE(has_attention(p2));
  CHECK(acoustic_forward(p2, random_features(rng, 40)).frames == 10);

  AcousticConfig bad;
  bad.dense_units = 64;
  CHECK_THROWS_AS(build_acoustic_model(bad, 54, 1), UsageError);
  bad.paper_faithful = false;
  CHECK_NOTHROW(build_acoustic_model(bad, 54, 1));
}

TEST_CASE("zeroed output layer gives uniform posteriors") {
  auto params = build_acoustic_model({}, 54, 4);
  for (auto& v : params.at("acoustic.output.weight").mutable_values()) v = 0.0;
  std::mt19937_64 rng(5);
  auto grid = acoustic_forward(params, random_features(rng, 30));
  for (double p : grid.probs) CHECK(p == doctest::Approx(1.0 / 55).epsilon(1e-12));
}

TEST_CASE("acoustic forward is deterministic") {
  auto a = build_acoustic_model({}, 54, 9);
  auto b = build_acoustic_model({}, 54, 9);
  CHECK(nn::bit_equal(a, b));
  std::mt19937_64 rng(6);
  auto f = random_features(rng, 50);
  CHECK(acoustic_forward(a, f).probs == acoustic_forward(b, f).probs);
  for (const auto& [name, t] : a)
    for (double v : t.values()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

TEST_CASE("acoustic model gradient check") {
  AcousticConfig cfg;
  auto params = build_acoustic_model(cfg, 6, 11);
  std::mt19937_64 rng(12);
  testing::randomize_biases(params, rng);
  auto f = random_features(rng, 20);
  const phonetics::PhoneSeq target{1, 3, 5};
  auto res = nn::grad_check([&] { return ctc_loss(acoustic_log_probs(params, f), target); }, params, 1e-5, 200, 3);
  INFO("worst: " << res.worst);
  CHECK(res.max_relative_error < 1e-3);
}

TEST_CASE("ctc training reduces the loss") {
  AcousticConfig cfg;
  auto params = build_acoustic_model(cfg, 8, 21);
  std::mt19937_64 rng(22);
  auto f = random_features(rng, 40);
  const phonetics::PhoneSeq target{0, 4, 2, 7};
  nn::OptimizerState opt({nn::OptimizerKind::Adam, 3e-4});
  double first = 0, last = 0;
  for (int step = 0; step < 50; ++step) {
    auto loss = ctc_loss(acoustic_log_probs(params, f), target);
    if (step == 0) first = loss.item();
    else CHECK(loss.item() < last);
    last = loss.item();
    nn::backward(loss);
    nn::optimizer_step(opt, params);
  }
  CHECK(last < 0.5 * first);
  for (int step = 0; step < 100; ++step) {
    nn::backward(ctc_loss(acoustic_log_probs(params, f), target));
    nn::optimizer_step(opt, params);
  }
  auto grid = acoustic_forward(params, f);
  CHECK(ctc_greedy_decode(grid) == target);
}

TEST_CASE("greedy decode collapses repeats and blanks") {
  PosteriorGrid g;
  g.frames = 6;
  g.classes = 3;
  const int path[] = {0, 0, 2, 0, 1, 1};
  for (int k : path)
    for (int c = 0; c < 3; ++c) g.probs.push_back(c == k ? 0.8 : 0.1);
  CHECK(ctc_greedy_decode(g) == phonetics::PhoneSeq{0, 0, 1});

  PosteriorGrid blank_only{2, 3, {0.1, 0.1, 0.8, 0.2, 0.1, 0.7}};
  CHECK(ctc_greedy_decode(blank_only).empty());

  // Best single path over all 4^6 paths, collapsed.
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    PosteriorGrid r{6, 4, random_rows(rng, 6, 4)};
    std::vector<int> path(6, 0), best_path;
    double best = -1;
    while (true) {
      double pr = 1;
      for (std::size_t t = 0; t < 6; ++t) pr *= r.at(t, static_cast<std::size_t>(path[t]));
      if (pr > best) best = pr, best_path = path;
      std::size_t i = 0;
      while (i < 6 && ++path[i] == 4) path[i++] = 0;
      if (i == 6) break;
    }
    CHECK(ctc_greedy_decode(r) == testing::ctc_collapse(best_path, 3));
  }
}
