#include "asr/augment.hpp"

#include <algorithm>
#include <cmath>

#include "asr/error.hpp"

namespace asr::augment {

void AugmentPolicy::validate(std::size_t feature_dim) const {
  if (speed_factors.empty()) throw UsageError("augment: speed_factors must not be empty");
  for (double f : speed_factors) {
    if (!(f > 0.5 && f < 2.0)) throw UsageError("augment: speed factors must lie in (0.5, 2.0)");
  }
  if (!(gain_db_min <= gain_db_max && gain_db_min >= -20.0 && gain_db_max <= 20.0)) {
    throw UsageError("augment: gain range must lie within [-20, 20] dB");
  }
  if (freq_mask_max >= feature_dim) throw UsageError("augment: freq_mask_max must be smaller than the feature width");
  if (!(time_mask_max_fraction >= 0.0 && time_mask_max_fraction < 1.0)) {
    throw UsageError("augment: time_mask_max_fraction must lie in [0, 1)");
  }
}

dsp::AudioBuffer speed_perturb(const dsp::AudioBuffer& audio, double factor) {
  if (!(factor > 0.5 && factor < 2.0)) throw UsageError("speed factor must lie in (0.5, 2.0)");
  if (factor == 1.0) return audio;
  return {dsp::resample_linear(audio.samples, factor), audio.sample_rate_hz};
}

VolumeResult volume_perturb(const dsp::AudioBuffer& audio, double gain_db) {
  if (!(gain_db >= -20.0 && gain_db <= 20.0)) throw UsageError("gain must lie in [-20, 20] dB");
  VolumeResult r{audio, 0};
  if (gain_db == 0.0) return r;
  const double g = std::pow(10.0, gain_db / 20.0);
  for (auto& s : r.audio.samples) {
    s *= g;
    if (s > 1.0 || s < -1.0) {
      s = std::clamp(s, -1.0, 1.0);
      ++r.clipped;
    }
  }
  return r;
}

dsp::FeatureMatrix spec_augment(const dsp::FeatureMatrix& f, const AugmentPolicy& policy, std::mt19937_64& rng) {
  dsp::FeatureMatrix out = f;
  if (f.values.empty()) return out;
  double fill = 0.0;
  for (double v : f.values) fill += v;
  fill /= static_cast<double>(f.values.size());

  const std::size_t freq_max = std::min(policy.freq_mask_max, f.cols);
  for (std::size_t m = 0; m < policy.n_freq_masks; ++m) {
    const auto width = std::uniform_int_distribution<std::size_t>(0, freq_max)(rng);
    const auto start = std::uniform_int_distribution<std::size_t>(0, f.cols - width)(rng);
    for (std::size_t t = 0; t < f.rows; ++t)
      for (std::size_t d = start; d < start + width; ++d) out.at(t, d) = fill;
  }
  const auto time_max = static_cast<std::size_t>(std::floor(static_cast<double>(f.rows) * policy.time_mask_max_fraction));
  for (std::size_t m = 0; m < policy.n_time_masks; ++m) {
    const auto width = std::uniform_int_distribution<std::size_t>(0, time_max)(rng);
    const auto start = std::uniform_int_distribution<std::size_t>(0, f.rows - width)(rng);
    for (std::size_t t = start; t < start + width; ++t)
      for (std::size_t d = 0; d < f.cols; ++d) out.at(t, d) = fill;
  }
  return out;
}

dsp::AudioBuffer perturb_waveform(const dsp::AudioBuffer& audio, const AugmentPolicy& policy, std::mt19937_64& rng) {
  const auto pick = std::uniform_int_distribution<std::size_t>(0, policy.speed_factors.size() - 1)(rng);
  const double gain = std::uniform_real_distribution<double>(policy.gain_db_min, policy.gain_db_max)(rng);
  auto sped = speed_perturb(audio, policy.speed_factors[pick]);
  return volume_perturb(sped, gain).audio;
}

}  // namespace asr::augment
