#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace asr::dsp {

inline constexpr int kCanonicalRate = 16000;

struct AudioBuffer {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate_hz = kCanonicalRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

enum class FeatureKind { Mfcc13, Stacked39 };

// Row-major T x D matrix of per-frame features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  double frame_len_ms = 25.0;
  double hop_ms = 10.0;
  FeatureKind kind = FeatureKind::Mfcc13;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t d, FeatureKind k) : rows(t), cols(d), values(t * d, 0.0), kind(k) {}

  double& at(std::size_t t, std::size_t d) { return values[t * cols + d]; }
  double at(std::size_t t, std::size_t d) const { return values[t * cols + d]; }
  std::span<const double> row(std::size_t t) const { return {values.data() + t * cols, cols}; }
};

struct MelConfig {
  std::size_t n_fft = 512;
  std::size_t n_mels = 26;
  std::size_t n_ceps = 13;
  double fmin_hz = 0.0;
  std::optional<double> fmax_hz;  // defaults to Nyquist
  double pre_emphasis = 0.97;
  double frame_len_ms = 25.0;
  double hop_ms = 10.0;
  double log_floor = 1e-10;

  // Throws asr::UsageError on inconsistent settings.
  void validate(int sample_rate_hz) const;
  double upper_hz(int sample_rate_hz) const { return fmax_hz.value_or(sample_rate_hz / 2.0); }
};

// RIFF/WAVE, PCM s16le, mono only. Audio at other rates is linearly resampled
// to 16 kHz. Throws asr::DataError on malformed input.
AudioBuffer load_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

// Linear-interpolation resampling to round(N / factor) samples; output sample
// i reads the input at position i * factor (clamped to the last sample).
std::vector<double> resample_linear(std::span<const double> samples, double factor);

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& data);

std::size_t frame_length_samples(const MelConfig& cfg, int sample_rate_hz);
std::size_t hop_samples(const MelConfig& cfg, int sample_rate_hz);
// T = 1 + floor((N - frame_len) / hop); zero when N < frame_len.
std::size_t frame_count(std::size_t n_samples, std::size_t frame_len, std::size_t hop);

// Mel scale (HTK).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Linear mel filterbank energies (before the log), T x n_mels.
FeatureMatrix compute_mel_energies(const AudioBuffer& audio, const MelConfig& cfg = {});
// T x n_ceps cepstra.
FeatureMatrix compute_mfcc(const AudioBuffer& audio, const MelConfig& cfg = {});
// Regression deltas with clamped edge indices; same shape as the input.
FeatureMatrix compute_deltas(const FeatureMatrix& f, std::size_t window = 2);
// [mfcc | delta | delta2] then per-column mean/variance normalization.
FeatureMatrix stack_features(const FeatureMatrix& mfcc, const FeatureMatrix& delta, const FeatureMatrix& delta2);

// Full 39-dimensional front end.
FeatureMatrix featurize(const AudioBuffer& audio, const MelConfig& cfg = {});

}  // namespace asr::dsp
