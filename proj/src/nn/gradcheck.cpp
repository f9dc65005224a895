#include "asr/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "asr/error.hpp"

namespace asr::nn {

GradCheckResult grad_check(const std::function<Tensor()>& forward, Parameters& params, double epsilon,
                           std::size_t max_scalars, std::uint64_t seed, double tolerance) {
  params.zero_grad();
  Tensor loss = forward();
  const double baseline = loss.item();
  if (forward().item() != baseline) {
    throw VerificationError("grad_check: forward function is not deterministic");
  }
  backward(loss);

  std::mt19937_64 rng(seed);
  const std::size_t quota = std::max<std::size_t>(1, max_scalars / std::max<std::size_t>(1, params.size()));
  GradCheckResult result;
  for (auto& [name, t] : params) {
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > quota) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(quota);
      std::sort(idx.begin(), idx.end());
    }
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_values();
    for (auto i : idx) {
      if (result.checked >= max_scalars) break;
      const double a = analytic[i];
      auto estimate = [&](double step) {
        const double saved = values[i];
        values[i] = saved + step;
        const double plus = forward().item();
        values[i] = saved - step;
        const double minus = forward().item();
        values[i] = saved;
        return (plus - minus) / (2.0 * step);
      };
      auto rel = [&](double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); };
      double numeric = estimate(epsilon);
      double err = rel(numeric);
      if (err >= tolerance) {
        ++result.retried;
        for (double step : {epsilon / 10.0, epsilon * 10.0}) {
          const double n = estimate(step);
          if (rel(n) < err) err = rel(n), numeric = n;
        }
      }
      if (err > result.max_relative_error || result.checked == 0) {
        result.max_relative_error = err;
        result.worst = name + "[" + std::to_string(i) + "]";
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
      ++result.checked;
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace asr::nn
