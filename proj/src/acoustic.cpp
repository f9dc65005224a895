#include "asr/acoustic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "asr/error.hpp"
#include "asr/nn/init.hpp"
#include "asr/nn/ops.hpp"

namespace asr::acoustic {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

void AcousticConfig::validate() const {
  if (conv1_filters == 0 || conv2_filters == 0 || dense_units == 0) throw UsageError("acoustic layer sizes must be positive");
  if (kernel_size % 2 == 0) throw UsageError("acoustic kernel size must be odd");
  if (paper_faithful && (conv1_filters != 32 || conv2_filters != 64 || kernel_size != 3 || dense_units != 128)) {
    throw UsageError("paper-faithful acoustic model requires 32/64 filters of 3x3 and 128 dense units");
  }
}

nn::Parameters build_acoustic_model(const AcousticConfig& cfg, std::size_t n_phones, std::uint64_t seed) {
  cfg.validate();
  if (n_phones < 2) throw UsageError("acoustic model needs at least two phones");
  std::mt19937_64 rng(seed);
  const std::size_t k = cfg.kernel_size;
  const std::size_t pooled_width = (kFeatureDim / 2) / 2;
  const std::size_t flat = cfg.conv2_filters * pooled_width;
  const std::size_t d = cfg.dense_units;

  // Glorot-uniform kernels, zero biases.
  nn::Parameters p;
  p.add("acoustic.conv1.kernels", nn::uniform_leaf({cfg.conv1_filters, 1, k, k}, nn::xavier_limit(k * k, cfg.conv1_filters * k * k), rng));
  p.add("acoustic.conv1.bias", nn::Tensor::zeros({cfg.conv1_filters}, true));
  p.add("acoustic.conv2.kernels",
        nn::uniform_leaf({cfg.conv2_filters, cfg.conv1_filters, k, k}, nn::xavier_limit(cfg.conv1_filters * k * k, cfg.conv2_filters * k * k), rng));
  p.add("acoustic.conv2.bias", nn::Tensor::zeros({cfg.conv2_filters}, true));
  p.add("acoustic.dense.weight", nn::uniform_leaf({d, flat}, nn::xavier_limit(flat, d), rng));
  p.add("acoustic.dense.bias", nn::Tensor::zeros({d}, true));
  if (cfg.use_attention) {
    for (const char* name : {"acoustic.attention.query", "acoustic.attention.key", "acoustic.attention.value"}) {
      p.add(name, nn::uniform_leaf({d, d}, nn::xavier_limit(d, d), rng));
    }
  }
  p.add("acoustic.output.weight", nn::uniform_leaf({n_phones + 1, d}, nn::xavier_limit(d, n_phones + 1), rng));
  p.add("acoustic.output.bias", nn::Tensor::zeros({n_phones + 1}, true));
  return p;
}

bool has_attention(const nn::Parameters& params) { return params.contains("acoustic.attention.query"); }

std::size_t output_classes(const nn::Parameters& params) { return params.at("acoustic.output.weight").dim(0); }

nn::Tensor acoustic_log_probs(const nn::Parameters& params, const dsp::FeatureMatrix& features) {
  if (features.cols != kFeatureDim) throw DataError("acoustic model expects 39-dimensional stacked features");
  if (features.rows < 4) {
    throw DataError("utterance too short for the acoustic model: " + std::to_string(features.rows) + " frames < 4");
  }
  auto x = nn::Tensor::from({1, features.rows, features.cols}, features.values);
  x = nn::max_pool2d(nn::relu(nn::conv2d(x, params.at("acoustic.conv1.kernels"), params.at("acoustic.conv1.bias"))));
  x = nn::max_pool2d(nn::relu(nn::conv2d(x, params.at("acoustic.conv2.kernels"), params.at("acoustic.conv2.bias"))));
  auto h = nn::relu(nn::dense(nn::flatten_frames(x), params.at("acoustic.dense.weight"), params.at("acoustic.dense.bias")));
  if (has_attention(params)) {
    h = nn::attention_layer(h, params.at("acoustic.attention.query"), params.at("acoustic.attention.key"),
                            params.at("acoustic.attention.value"));
  }
  auto logits = nn::dense(h, params.at("acoustic.output.weight"), params.at("acoustic.output.bias"));
  return nn::log_softmax(logits);
}

PosteriorGrid grid_from_log_probs(const nn::Tensor& log_probs) {
  PosteriorGrid g;
  g.frames = log_probs.dim(0);
  g.classes = log_probs.dim(1);
  g.probs.resize(log_probs.size());
  for (std::size_t i = 0; i < g.probs.size(); ++i) g.probs[i] = std::exp(log_probs[i]);
  return g;
}

PosteriorGrid acoustic_forward(const nn::Parameters& params, const dsp::FeatureMatrix& features) {
  return grid_from_log_probs(acoustic_log_probs(params, features));
}

std::size_t ctc_min_frames(const phonetics::PhoneSeq& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) n += target[i] == target[i - 1] ? 1 : 0;
  return n;
}

nn::Tensor ctc_loss(const nn::Tensor& log_probs, const phonetics::PhoneSeq& target) {
  if (log_probs.rank() != 2) throw UsageError("ctc_loss expects [T, C] log probabilities");
  const std::size_t frames = log_probs.dim(0), classes = log_probs.dim(1);
  const int blank = static_cast<int>(classes) - 1;
  if (target.empty()) throw DataError("ctc_loss: empty target");
  for (int p : target) {
    if (p < 0 || p >= blank) throw DataError("ctc_loss: target label out of range");
  }
  if (frames < ctc_min_frames(target)) {
    throw DataError("ctc_loss: target of " + std::to_string(target.size()) + " labels is infeasible in " +
                    std::to_string(frames) + " frames");
  }

  // Blank-augmented label sequence b l1 b l2 ... b.
  const std::size_t s_len = 2 * target.size() + 1;
  std::vector<int> ext(s_len, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  const auto lp = log_probs.values();
  auto y = [&](std::size_t t, std::size_t s) { return lp[t * classes + static_cast<std::size_t>(ext[s])]; };
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(frames * s_len, kNegInf), beta(frames * s_len, kNegInf);
  alpha[0] = y(0, 0);
  if (s_len > 1) alpha[1] = y(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < s_len; ++s) {
      double a = alpha[(t - 1) * s_len + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * s_len + s - 1]);
      if (can_skip(s)) a = log_add(a, alpha[(t - 1) * s_len + s - 2]);
      alpha[t * s_len + s] = a == kNegInf ? kNegInf : a + y(t, s);
    }
  }
  const std::size_t last = frames - 1;
  beta[last * s_len + s_len - 1] = y(last, s_len - 1);
  beta[last * s_len + s_len - 2] = y(last, s_len - 2);
  for (std::size_t t = last; t-- > 0;) {
    for (std::size_t s = 0; s < s_len; ++s) {
      double b = beta[(t + 1) * s_len + s];
      if (s + 1 < s_len) b = log_add(b, beta[(t + 1) * s_len + s + 1]);
      if (s + 2 < s_len && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * s_len + s + 2]);
      beta[t * s_len + s] = b == kNegInf ? kNegInf : b + y(t, s);
    }
  }
  const double log_total = log_add(alpha[last * s_len + s_len - 1], alpha[last * s_len + s_len - 2]);
  if (log_total == kNegInf) throw DataError("ctc_loss: zero probability for every alignment");

  // d(-log P)/d log y_t(k) = -sum_{s: ext[s]=k} alpha_t(s) beta_t(s) / (y_t(k) P).
  std::vector<double> grad(frames * classes, 0.0);
  std::vector<double> acc(classes);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(acc.begin(), acc.end(), kNegInf);
    for (std::size_t s = 0; s < s_len; ++s) {
      const auto k = static_cast<std::size_t>(ext[s]);
      acc[k] = log_add(acc[k], alpha[t * s_len + s] + beta[t * s_len + s]);
    }
    for (std::size_t k = 0; k < classes; ++k) {
      if (acc[k] != kNegInf) grad[t * classes + k] = -std::exp(acc[k] - lp[t * classes + k] - log_total);
    }
  }

  return nn::make_op({1}, {-log_total}, {log_probs}, [grad = std::move(grad)](nn::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * grad[i];
  });
}

double ctc_loss(const PosteriorGrid& grid, const phonetics::PhoneSeq& target) {
  std::vector<double> logs(grid.probs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(grid.probs[i]);
  return ctc_loss(nn::Tensor::from({grid.frames, grid.classes}, std::move(logs)), target).item();
}

phonetics::PhoneSeq ctc_greedy_decode(const PosteriorGrid& grid) {
  phonetics::PhoneSeq out;
  int prev = -1;
  for (std::size_t t = 0; t < grid.frames; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.classes; ++k)
      if (grid.at(t, k) > grid.at(t, best)) best = k;
    const int label = static_cast<int>(best);
    if (label != prev && label != grid.blank()) out.push_back(label);
    prev = label;
  }
  return out;
}

}  // namespace asr::acoustic
