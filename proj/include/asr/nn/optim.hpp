#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "asr/nn/tensor.hpp"

namespace asr::nn {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  OptimizerConfig config;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  // Parameters whose name starts with any of these are never updated.
  std::vector<std::string> frozen_prefixes;

  explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}
  bool is_frozen(const std::string& name) const;
};

// Applies one update from the accumulated gradients and zeroes them.
// Updated values are rounded to float32 so parameters always equal their
// serialized form.
void optimizer_step(OptimizerState& state, Parameters& params);

// Rounds every parameter to the nearest float32.
void round_to_storage(Parameters& params);

}  // namespace asr::nn
