#include "asr/gradsuite.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <random>

#include "asr/acoustic.hpp"
#include "asr/error.hpp"
#include "asr/lm.hpp"
#include "asr/nn/gradcheck.hpp"
#include "asr/nn/ops.hpp"
#include "asr/phonetics.hpp"

namespace asr::gradsuite {
namespace {

using nn::Parameters;
using nn::Tensor;

Tensor uniform(std::mt19937_64& rng, nn::Shape shape, double lo, double hi, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(nn::shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Pairwise well-separated values keep pooling and ReLU switches outside the
// finite-difference step.
Tensor separated(std::mt19937_64& rng, nn::Shape shape, double gap = 0.05) {
  std::vector<double> v(nn::shape_size(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (static_cast<double>(i) - 0.5 * static_cast<double>(v.size())) * gap + gap / 2;
  std::shuffle(v.begin(), v.end(), rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

struct Check {
  std::function<Tensor()> forward;
  Parameters params;
  double epsilon = 1e-3;
};

using Builder = std::function<Check(std::mt19937_64&)>;

const std::vector<std::pair<std::string, Builder>>& cases() {
  static const std::vector<std::pair<std::string, Builder>> all = {
      {"conv2d",
       [](std::mt19937_64& rng) {
         Check c;
         c.params.add("x", uniform(rng, {2, 6, 5}, -1, 1, true));
         c.params.add("k", uniform(rng, {3, 2, 3, 3}, -1, 1, true));
         c.params.add("b", uniform(rng, {3}, -1, 1, true));
         auto r = uniform(rng, {3, 6, 5}, -1, 1, false);
         c.forward = [p = c.params, r]() mutable {
           return nn::sum(nn::mul(nn::conv2d(p.at("x"), p.at("k"), p.at("b")), r));
         };
         return c;
       }},
      {"max_pool2d",
       [](std::mt19937_64& rng) {
         Check c;
         c.params.add("x", separated(rng, {3, 6, 7}));
         auto r = uniform(rng, {3, 3, 3}, -1, 1, false);
         c.forward = [p = c.params, r]() mutable { return nn::sum(nn::mul(nn::max_pool2d(p.at("x")), r)); };
         return c;
       }},
      {"dense",
       [](std::mt19937_64& rng) {
         Check c;
         c.params.add("x", uniform(rng, {3, 5}, -1, 1, true));
         c.params.add("w", uniform(rng, {4, 5}, -1, 1, true));
         c.params.add("b", uniform(rng, {4}, -1, 1, true));
         auto r = uniform(rng, {3, 4}, -1, 1, false);
         c.forward = [p = c.params, r]() mutable {
           return nn::sum(nn::mul(nn::dense(p.at("x"), p.at("w"), p.at("b")), r));
         };
         return c;
       }},
      {"lstm_cell",
       [](std::mt19937_64& rng) {
         Check c;
         const std::size_t d = 4, k = 3, steps = 3;
         c.params.add("w_ih", uniform(rng, {4 * k, d}, -0.5, 0.5, true));
         c.params.add("w_hh", uniform(rng, {4 * k, k}, -0.5, 0.5, true));
         c.params.add("b", uniform(rng, {4 * k}, -0.5, 0.5, true));
         c.params.add("h0", uniform(rng, {k}, -0.5, 0.5, true));
         c.params.add("c0", uniform(rng, {k}, -0.5, 0.5, true));
         std::vector<Tensor> xs;
         for (std::size_t t = 0; t < steps; ++t) xs.push_back(uniform(rng, {d}, -1, 1, false));
         auto rh = uniform(rng, {k}, -1, 1, false), rc = uniform(rng, {k}, -1, 1, false);
         c.forward = [p = c.params, xs, rh, rc]() mutable {
           nn::LstmState s{p.at("h0"), p.at("c0")};
           for (const auto& x : xs) s = nn::lstm_cell(x, s, p.at("w_ih"), p.at("w_hh"), p.at("b"));
           return nn::add(nn::sum(nn::mul(s.h, rh)), nn::sum(nn::mul(s.c, rc)));
         };
         return c;
       }},
      {"attention_layer",
       [](std::mt19937_64& rng) {
         Check c;
         const std::size_t t = 4, d = 6;
         c.params.add("seq", uniform(rng, {t, d}, -1, 1, true));
         for (const char* n : {"wq", "wk", "wv"}) c.params.add(n, uniform(rng, {d, d}, -0.5, 0.5, true));
         auto r = uniform(rng, {t, d}, -1, 1, false);
         c.forward = [p = c.params, r]() mutable {
           return nn::sum(nn::mul(nn::attention_layer(p.at("seq"), p.at("wq"), p.at("wk"), p.at("wv")), r));
         };
         return c;
       }},
      {"softmax_cross_entropy",
       [](std::mt19937_64& rng) {
         Check c;
         c.params.add("z", uniform(rng, {7}, -2, 2, true));
         c.params.add("zz", uniform(rng, {3, 5}, -2, 2, true));
         const auto target = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
         auto r = uniform(rng, {3, 5}, -1, 1, false);
         auto r2 = uniform(rng, {3, 5}, -1, 1, false);
         c.forward = [p = c.params, target, r, r2]() mutable {
           auto a = nn::cross_entropy(p.at("z"), target);
           auto b = nn::sum(nn::mul(nn::softmax(p.at("zz")), r));
           auto d = nn::sum(nn::mul(nn::log_softmax(p.at("zz")), r2));
           return nn::add(nn::add(a, b), d);
         };
         return c;
       }},
      {"ctc_loss",
       [](std::mt19937_64& rng) {
         Check c;
         std::uniform_int_distribution<std::size_t> frames(4, 8), len(1, 3);
         std::uniform_int_distribution<int> label(0, 3);
         phonetics::PhoneSeq target(len(rng));
         for (auto& l : target) l = label(rng);
         const auto t = std::max(frames(rng), acoustic::ctc_min_frames(target));
         c.params.add("logits", uniform(rng, {t, 5}, -2, 2, true));
         c.epsilon = 1e-5;
         c.forward = [p = c.params, target]() mutable {
           return acoustic::ctc_loss(nn::log_softmax(p.at("logits")), target);
         };
         return c;
       }},
      {"acoustic_model",
       [](std::mt19937_64& rng) {
         Check c;
         const auto n_phones = phonetics::default_inventory().size();
         c.params = acoustic::build_acoustic_model(acoustic::AcousticConfig{}, n_phones, rng());
         // Zero biases park every ReLU of an all-zero receptive field on its kink.
         std::uniform_real_distribution<double> bias(-0.1, 0.1);
         for (auto& [name, t] : c.params) {
           if (name.find("bias") == std::string::npos) continue;
           for (auto& v : t.mutable_values()) v = bias(rng);
         }
         dsp::FeatureMatrix f(8, acoustic::kFeatureDim, dsp::FeatureKind::Stacked39);
         std::normal_distribution<double> n;
         for (auto& v : f.values) v = n(rng);
         std::uniform_int_distribution<int> label(0, static_cast<int>(n_phones) - 1);
         phonetics::PhoneSeq target{label(rng)};
         if (rng() % 2) {
           int second = label(rng);
           if (second == target[0]) second = (second + 1) % static_cast<int>(n_phones);
           target.push_back(second);
         }
         c.epsilon = 1e-5;
         c.forward = [p = c.params, f, target]() mutable {
           return acoustic::ctc_loss(acoustic::acoustic_log_probs(p, f), target);
         };
         return c;
       }},
      {"lm_step",
       [](std::mt19937_64& rng) {
         Check c;
         const auto vocab = lm::TokenVocab::for_phones(phonetics::default_inventory()).size();
         c.params = lm::build_lm(vocab, lm::LmConfig{}, rng());
         std::uniform_int_distribution<std::size_t> len(1, 4);
         std::uniform_int_distribution<lm::TokenId> tok(static_cast<lm::TokenId>(lm::TokenVocab::kWordBoundary),
                                                        static_cast<lm::TokenId>(vocab) - 1);
         lm::TokenSeq s(len(rng));
         for (auto& x : s) x = tok(rng);
         c.epsilon = 1e-3;
         c.forward = [p = c.params, s]() mutable { return lm::lm_sequence_loss(p, s); };
         return c;
       }},
  };
  return all;
}

}  // namespace

std::vector<std::string> case_names() {
  std::vector<std::string> out;
  for (const auto& [name, b] : cases()) out.push_back(name);
  return out;
}

CaseResult run_case(const std::string& name, const SuiteOptions& opts) {
  const auto& all = cases();
  auto it = std::find_if(all.begin(), all.end(), [&](const auto& c) { return c.first == name; });
  if (it == all.end()) throw UsageError("unknown gradient check case '" + name + "'");
  CaseResult res;
  res.name = name;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t s = 0; s < opts.seeds; ++s) {
    const std::uint64_t seed = opts.base_seed + s;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(it - all.begin())};
    std::mt19937_64 rng(seq);
    auto check = it->second(rng);
    const auto r = nn::grad_check(check.forward, check.params, check.epsilon, opts.max_scalars, seed, opts.tolerance);
    res.retried += r.retried;
    if (s == 0 || r.max_relative_error > res.worst_error) {
      res.worst_error = r.max_relative_error;
      res.worst_seed = seed;
      res.worst_scalar = r.worst;
    }
    ++res.seeds;
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.passed = res.seeds > 0 && res.worst_error < opts.tolerance;
  return res;
}

std::vector<CaseResult> run_suite(const SuiteOptions& opts, const std::function<void(const CaseResult&)>& on_case) {
  std::vector<CaseResult> out;
  for (const auto& name : case_names()) {
    out.push_back(run_case(name, opts));
    if (on_case) on_case(out.back());
  }
  return out;
}

}  // namespace asr::gradsuite
