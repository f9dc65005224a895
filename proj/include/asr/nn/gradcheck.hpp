#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "asr/nn/tensor.hpp"

namespace asr::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "name[index]" of the worst scalar
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t retried = 0;  // scalars that needed a second step size
};

// Compares back-propagated gradients with central differences on up to
// `max_scalars` entries spread over all parameters. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// A scalar whose error at `epsilon` reaches `tolerance` is re-estimated at
// epsilon/10 and 10*epsilon and keeps the smallest error: the first step
// straddles ReLU/max-pool switches less often, the second has less round-off
// on tiny gradients. A wrong gradient fails at all three.
// `forward` must build a fresh graph and return a scalar loss each call;
// a forward that disagrees with itself throws asr::VerificationError.
GradCheckResult grad_check(const std::function<Tensor()>& forward, Parameters& params, double epsilon = 1e-3,
                           std::size_t max_scalars = 200, std::uint64_t seed = 0, double tolerance = 1e-3);

}  // namespace asr::nn
