#pragma once

#include <cmath>
#include <random>

#include "asr/nn/tensor.hpp"

namespace asr::nn {

// U(-limit, limit) leaf, rounded to float32 storage precision.
inline Tensor uniform_leaf(Shape shape, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = static_cast<double>(static_cast<float>(dist(rng)));
  return Tensor::from(std::move(shape), std::move(v), true);
}

inline double he_limit(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

inline double xavier_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace asr::nn
