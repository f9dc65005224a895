#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace asr::gradsuite {

struct CaseResult {
  std::string name;
  std::size_t seeds = 0;
  double worst_error = 0.0;  // max relative error over all seeds
  std::uint64_t worst_seed = 0;
  std::string worst_scalar;
  std::size_t retried = 0;
  double seconds = 0.0;
  bool passed = false;
};

struct SuiteOptions {
  std::size_t seeds = 50;
  std::uint64_t base_seed = 0;
  double tolerance = 1e-3;
  std::size_t max_scalars = 200;
};

// Names of every case, in run order.
std::vector<std::string> case_names();

// Central-difference checks of each differentiable operation, the full
// acoustic model and a full LM step at their published sizes.
CaseResult run_case(const std::string& name, const SuiteOptions& opts);
std::vector<CaseResult> run_suite(const SuiteOptions& opts,
                                  const std::function<void(const CaseResult&)>& on_case = {});

}  // namespace asr::gradsuite
