#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "asr/dsp.hpp"

namespace asr::augment {

struct AugmentPolicy {
  bool enabled = true;
  std::vector<double> speed_factors{0.9, 1.0, 1.1};
  double gain_db_min = -6.0;
  double gain_db_max = 6.0;
  std::size_t n_freq_masks = 1;
  std::size_t freq_mask_max = 8;
  std::size_t n_time_masks = 1;
  double time_mask_max_fraction = 0.1;
  std::uint64_t seed = 0;

  // Throws asr::UsageError when a field is out of range for `feature_dim` columns.
  void validate(std::size_t feature_dim = 39) const;
};

struct VolumeResult {
  dsp::AudioBuffer audio;
  std::size_t clipped = 0;
};

// Kaldi-style speed perturbation: resample so that the output has
// round(N / factor) samples at the same nominal rate. factor in (0.5, 2).
dsp::AudioBuffer speed_perturb(const dsp::AudioBuffer& audio, double factor);

// Multiplies by 10^(gain_db/20) and clips to [-1, 1]. gain_db in [-20, 20].
VolumeResult volume_perturb(const dsp::AudioBuffer& audio, double gain_db);

// Frequency and time masking filled with the matrix's global mean.
dsp::FeatureMatrix spec_augment(const dsp::FeatureMatrix& f, const AugmentPolicy& policy, std::mt19937_64& rng);

// Random speed + volume perturbation drawn from the policy.
dsp::AudioBuffer perturb_waveform(const dsp::AudioBuffer& audio, const AugmentPolicy& policy, std::mt19937_64& rng);

}  // namespace asr::augment
