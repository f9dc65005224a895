#include "asr/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace asr::nn {

bool OptimizerState::is_frozen(const std::string& name) const {
  for (const auto& p : frozen_prefixes) {
    if (name.rfind(p, 0) == 0) return true;
  }
  return false;
}

void optimizer_step(OptimizerState& state, Parameters& params) {
  for (auto& [name, t] : params) {
    if (!t.requires_grad() || t.grad().size() != t.size()) {
      throw std::logic_error("optimizer_step: missing gradient for " + name);
    }
  }
  ++state.step;
  const auto& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (auto& [name, t] : params) {
    if (state.is_frozen(name)) {
      t.zero_grad();
      continue;
    }
    auto values = t.mutable_values();
    auto grad = t.grad();
    if (cfg.kind == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= cfg.learning_rate * grad[i];
    } else {
      auto& m = state.first_moment[name];
      auto& v = state.second_moment[name];
      if (m.size() != values.size()) {
        m.assign(values.size(), 0.0);
        v.assign(values.size(), 0.0);
      }
      for (std::size_t i = 0; i < values.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        values[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      }
    }
    for (auto& x : values) x = static_cast<double>(static_cast<float>(x));
    t.zero_grad();
  }
}

void round_to_storage(Parameters& params) {
  for (auto& [_, t] : params) {
    for (auto& x : t.mutable_values()) x = static_cast<double>(static_cast<float>(x));
  }
}

}  // namespace asr::nn
