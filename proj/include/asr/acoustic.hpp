#pragma once

#include <cstdint>
#include <vector>

#include "asr/dsp.hpp"
#include "asr/nn/tensor.hpp"
#include "asr/phonetics.hpp"

namespace asr::acoustic {

struct AcousticConfig {
  std::size_t conv1_filters = 32;
  std::size_t conv2_filters = 64;
  std::size_t kernel_size = 3;
  std::size_t dense_units = 128;
  bool use_attention = true;
  // When set, the layer sizes above must keep their published values.
  bool paper_faithful = true;

  void validate() const;
};

// Row-stochastic T' x (P+1) matrix of per-frame posteriors; the last column is
// the CTC blank.
struct PosteriorGrid {
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<double> probs;
  std::size_t frame_subsample = 4;

  double at(std::size_t t, std::size_t k) const { return probs[t * classes + k]; }
  int blank() const { return static_cast<int>(classes) - 1; }
};

inline constexpr std::size_t kFeatureDim = 39;

// T' = floor(floor(T/2)/2).
inline std::size_t downsampled_frames(std::size_t frames) { return (frames / 2) / 2; }

// conv1, conv2, dense, optional attention and an output layer over
// n_phones + 1 classes, all under the "acoustic." prefix.
nn::Parameters build_acoustic_model(const AcousticConfig& cfg, std::size_t n_phones, std::uint64_t seed);

bool has_attention(const nn::Parameters& params);
std::size_t output_classes(const nn::Parameters& params);

// Differentiable forward pass to per-frame log posteriors [T', P+1].
nn::Tensor acoustic_log_probs(const nn::Parameters& params, const dsp::FeatureMatrix& features);

// Inference forward pass.
PosteriorGrid acoustic_forward(const nn::Parameters& params, const dsp::FeatureMatrix& features);
PosteriorGrid grid_from_log_probs(const nn::Tensor& log_probs);

// -log of the total probability of all blank-augmented alignments of `target`.
// log_probs is [T, C] with blank = C - 1. Throws DataError if no alignment fits.
nn::Tensor ctc_loss(const nn::Tensor& log_probs, const phonetics::PhoneSeq& target);
double ctc_loss(const PosteriorGrid& grid, const phonetics::PhoneSeq& target);

// Minimum frames any alignment needs: |target| plus one per adjacent repeat.
std::size_t ctc_min_frames(const phonetics::PhoneSeq& target);

// Best path: per-frame argmax, collapse repeats, drop blanks.
phonetics::PhoneSeq ctc_greedy_decode(const PosteriorGrid& grid);

}  // namespace asr::acoustic
