#include "asr/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "asr/error.hpp"

namespace asr::dsp {
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

void MelConfig::validate(int sample_rate_hz) const {
  if (sample_rate_hz <= 0) throw UsageError("sample rate must be positive");
  if (n_ceps == 0 || n_ceps > n_mels) throw UsageError("n_ceps must be in [1, n_mels]");
  if (n_fft == 0 || (n_fft & (n_fft - 1)) != 0) throw UsageError("n_fft must be a power of two");
  const double hi = upper_hz(sample_rate_hz);
  if (!(fmin_hz >= 0 && fmin_hz < hi && hi <= sample_rate_hz / 2.0)) {
    throw UsageError("mel band edges must satisfy 0 <= fmin < fmax <= sample_rate/2");
  }
  if (frame_length_samples(*this, sample_rate_hz) > n_fft) throw UsageError("frame longer than n_fft");
  if (hop_samples(*this, sample_rate_hz) == 0) throw UsageError("hop must be at least one sample");
  if (log_floor <= 0) throw UsageError("log_floor must be positive");
}

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file" + where);
  }

  bool have_fmt = false;
  int rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::size_t len = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(len, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw DataError("truncated fmt chunk" + where);
      const unsigned char* f = bytes.data() + body;
      if (read_u16(f) != 1) throw DataError("non-PCM encoding" + where);
      if (read_u16(f + 2) != 1) throw DataError("multi-channel input is not supported" + where);
      if (read_u16(f + 14) != 16) throw DataError("only 16-bit PCM is supported" + where);
      rate = static_cast<int>(read_u32(f + 4));
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = avail;
      have_data = true;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw DataError("missing fmt chunk" + where);
  if (!have_data) throw DataError("missing data chunk" + where);
  if (rate <= 0) throw DataError("invalid sample rate" + where);
  if (data_len < 2) throw DataError("zero-length payload" + where);

  AudioBuffer audio;
  audio.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    audio.samples[i] = static_cast<std::int16_t>(read_u16(data + 2 * i)) / 32768.0;
  }
  if (rate != kCanonicalRate) {
    audio.samples = resample_linear(audio.samples, static_cast<double>(rate) / kCanonicalRate);
  }
  audio.sample_rate_hz = kCanonicalRate;
  return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  std::string out;
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  out.append("RIFF");
  put_u32(out, 36 + 2 * n);
  out.append("WAVEfmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.append("data");
  put_u32(out, 2 * n);
  for (double s : audio.samples) {
    const double scaled = std::round(s * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write wav file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write: " + path.string());
}

std::vector<double> resample_linear(std::span<const double> samples, double factor) {
  if (samples.empty()) return {};
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(samples.size()) / factor));
  std::vector<double> out(n_out);
  const std::size_t last = samples.size() - 1;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * factor;
    const auto i0 = std::min(static_cast<std::size_t>(pos), last);
    const std::size_t i1 = std::min(i0 + 1, last);
    const double frac = std::min(pos - static_cast<double>(i0), 1.0);
    out[i] = samples[i0] + frac * (samples[i1] - samples[i0]);
  }
  return out;
}

void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w(std::cos(ang * k), std::sin(ang * k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

std::size_t frame_length_samples(const MelConfig& cfg, int sample_rate_hz) {
  return static_cast<std::size_t>(std::llround(cfg.frame_len_ms * sample_rate_hz / 1000.0));
}

std::size_t hop_samples(const MelConfig& cfg, int sample_rate_hz) {
  return static_cast<std::size_t>(std::llround(cfg.hop_ms * sample_rate_hz / 1000.0));
}

std::size_t frame_count(std::size_t n_samples, std::size_t frame_len, std::size_t hop) {
  if (n_samples < frame_len) return 0;
  return 1 + (n_samples - frame_len) / hop;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

FeatureMatrix compute_mel_energies(const AudioBuffer& audio, const MelConfig& cfg) {
  const int sr = audio.sample_rate_hz;
  cfg.validate(sr);
  const std::size_t flen = frame_length_samples(cfg, sr);
  const std::size_t hop = hop_samples(cfg, sr);
  const std::size_t n_frames = frame_count(audio.size(), flen, hop);
  if (n_frames == 0) {
    throw DataError("audio shorter than one frame (" + std::to_string(audio.size()) + " < " + std::to_string(flen) +
                    " samples)");
  }

  std::vector<double> emph(audio.size());
  emph[0] = audio.samples[0];
  for (std::size_t i = 1; i < emph.size(); ++i) emph[i] = audio.samples[i] - cfg.pre_emphasis * audio.samples[i - 1];

  std::vector<double> window(flen);
  for (std::size_t i = 0; i < flen; ++i) {
    window[i] = flen > 1 ? 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(flen - 1)) : 1.0;
  }

  // Triangular filters on continuous bin frequencies, edges equally spaced in mel.
  const std::size_t n_bins = cfg.n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin_hz), mel_hi = hz_to_mel(cfg.upper_hz(sr));
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t m = 0; m < edges.size(); ++m) {
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) / static_cast<double>(cfg.n_mels + 1));
  }
  std::vector<double> weights(cfg.n_mels * n_bins, 0.0);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sr / static_cast<double>(cfg.n_fft);
      double w = 0.0;
      if (f > left && f <= center) w = (f - left) / (center - left);
      else if (f > center && f < right) w = (right - f) / (right - center);
      weights[m * n_bins + k] = w;
    }
  }

  FeatureMatrix out(n_frames, cfg.n_mels, FeatureKind::Mfcc13);
  out.frame_len_ms = cfg.frame_len_ms;
  out.hop_ms = cfg.hop_ms;
  std::vector<std::complex<double>> buf(cfg.n_fft);
  std::vector<double> mag(n_bins);
  for (std::size_t t = 0; t < n_frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (std::size_t i = 0; i < flen; ++i) buf[i] = emph[t * hop + i] * window[i];
    fft(buf);
    for (std::size_t k = 0; k < n_bins; ++k) mag[k] = std::abs(buf[k]);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) e += weights[m * n_bins + k] * mag[k];
      out.at(t, m) = e;
    }
  }
  return out;
}

FeatureMatrix compute_mfcc(const AudioBuffer& audio, const MelConfig& cfg) {
  const FeatureMatrix mel = compute_mel_energies(audio, cfg);
  const std::size_t nm = cfg.n_mels;
  FeatureMatrix out(mel.rows, cfg.n_ceps, FeatureKind::Mfcc13);
  out.frame_len_ms = cfg.frame_len_ms;
  out.hop_ms = cfg.hop_ms;
  // Orthonormal DCT-II.
  std::vector<double> basis(cfg.n_ceps * nm);
  for (std::size_t k = 0; k < cfg.n_ceps; ++k) {
    const double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(nm));
    for (std::size_t m = 0; m < nm; ++m) {
      basis[k * nm + m] = norm * std::cos(std::numbers::pi * static_cast<double>(k) * (m + 0.5) / static_cast<double>(nm));
    }
  }
  std::vector<double> logmel(nm);
  for (std::size_t t = 0; t < mel.rows; ++t) {
    for (std::size_t m = 0; m < nm; ++m) logmel[m] = std::log(std::max(mel.at(t, m), cfg.log_floor));
    for (std::size_t k = 0; k < cfg.n_ceps; ++k) {
      double c = 0.0;
      for (std::size_t m = 0; m < nm; ++m) c += basis[k * nm + m] * logmel[m];
      out.at(t, k) = c;
    }
  }
  return out;
}

FeatureMatrix compute_deltas(const FeatureMatrix& f, std::size_t window) {
  if (f.rows == 0 || window == 0) throw UsageError("compute_deltas needs at least one frame and window >= 1");
  FeatureMatrix out = f;
  double denom = 0.0;
  for (std::size_t n = 1; n <= window; ++n) denom += static_cast<double>(n * n);
  denom *= 2.0;
  const auto last = static_cast<std::ptrdiff_t>(f.rows) - 1;
  for (std::size_t t = 0; t < f.rows; ++t) {
    for (std::size_t d = 0; d < f.cols; ++d) {
      double acc = 0.0;
      for (std::size_t n = 1; n <= window; ++n) {
        const auto ti = static_cast<std::ptrdiff_t>(t);
        const auto fwd = static_cast<std::size_t>(std::min(ti + static_cast<std::ptrdiff_t>(n), last));
        const auto bwd = static_cast<std::size_t>(std::max(ti - static_cast<std::ptrdiff_t>(n), std::ptrdiff_t{0}));
        acc += static_cast<double>(n) * (f.at(fwd, d) - f.at(bwd, d));
      }
      out.at(t, d) = acc / denom;
    }
  }
  return out;
}

FeatureMatrix stack_features(const FeatureMatrix& mfcc, const FeatureMatrix& delta, const FeatureMatrix& delta2) {
  const std::size_t t = mfcc.rows;
  if (delta.rows != t || delta2.rows != t || mfcc.cols != 13 || delta.cols != 13 || delta2.cols != 13) {
    throw UsageError("stack_features: expected three T x 13 matrices with equal T");
  }
  FeatureMatrix out(t, 39, FeatureKind::Stacked39);
  out.frame_len_ms = mfcc.frame_len_ms;
  out.hop_ms = mfcc.hop_ms;
  const FeatureMatrix* parts[3] = {&mfcc, &delta, &delta2};
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t d = 0; d < 13; ++d) out.at(r, p * 13 + d) = parts[p]->at(r, d);

  constexpr double kVarianceFloor = 1e-8;
  for (std::size_t d = 0; d < 39; ++d) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += out.at(r, d);
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t r = 0; r < t; ++r) var += (out.at(r, d) - mean) * (out.at(r, d) - mean);
    var /= static_cast<double>(t);
    const double inv = 1.0 / std::sqrt(std::max(var, kVarianceFloor));
    for (std::size_t r = 0; r < t; ++r) out.at(r, d) = (out.at(r, d) - mean) * inv;
  }
  return out;
}

FeatureMatrix featurize(const AudioBuffer& audio, const MelConfig& cfg) {
  if (cfg.n_ceps != 13) throw UsageError("the stacked front end requires n_ceps = 13");
  auto mfcc = compute_mfcc(audio, cfg);
  auto d1 = compute_deltas(mfcc);
  auto d2 = compute_deltas(d1);
  return stack_features(mfcc, d1, d2);
}

}  // namespace asr::dsp
