#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "asr/augment.hpp"
#include "asr/dsp.hpp"
#include "asr/error.hpp"
#include "doctest.h"
#include "dsp_oracle.hpp"

using namespace asr;
using namespace asr::dsp;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "asr_test_dsp";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Hand-assembled WAV with arbitrary header fields.
void write_raw_wav(const std::filesystem::path& p, std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                   std::uint16_t bits, const std::vector<std::int16_t>& samples) {
  auto u32 = [](std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [](std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
  };
  std::string s = "RIFF";
  u32(s, static_cast<std::uint32_t>(36 + 2 * samples.size()));
  s += "WAVEfmt ";
  u32(s, 16);
  u16(s, format);
  u16(s, channels);
  u32(s, rate);
  u32(s, rate * channels * bits / 8);
  u16(s, static_cast<std::uint16_t>(channels * bits / 8));
  u16(s, bits);
  s += "data";
  u32(s, static_cast<std::uint32_t>(2 * samples.size()));
  for (auto v : samples) u16(s, static_cast<std::uint16_t>(v));
  std::ofstream(p, std::ios::binary).write(s.data(), static_cast<std::streamsize>(s.size()));
}

AudioBuffer tone(double hz, std::size_t n, double amp = 0.5) {
  AudioBuffer a;
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / 16000.0);
  return a;
}

AudioBuffer noise(std::mt19937_64& rng, std::size_t n, double amp = 0.3) {
  AudioBuffer a;
  std::uniform_real_distribution<double> d(-amp, amp);
  a.samples.resize(n);
  for (auto& s : a.samples) s = d(rng);
  return a;
}

}  // namespace

TEST_CASE("load_wav sample counts and resampling") {
  auto p16 = temp_path("one_second_16k.wav");
  write_raw_wav(p16, 1, 1, 16000, 16, std::vector<std::int16_t>(16000, 1000));
  auto a = load_wav(p16);
  CHECK(a.size() == 16000);
  CHECK(a.sample_rate_hz == 16000);
  CHECK(a.samples[5] == doctest::Approx(1000.0 / 32768.0));

  auto p8 = temp_path("one_second_8k.wav");
  std::vector<std::int16_t> ramp(8000);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<std::int16_t>(i);
  write_raw_wav(p8, 1, 1, 8000, 16, ramp);
  auto b = load_wav(p8);
  CHECK(b.size() == 16000);
  CHECK(b.samples[3] == doctest::Approx(1.5 / 32768.0));  // halfway between samples 1 and 2

  AudioBuffer c{{0.0, 0.5, -0.25, -1.0, 0.99}, 16000};
  auto pc = temp_path("roundtrip.wav");
  write_wav(pc, c);
  auto back = load_wav(pc);
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(back.samples[i] - c.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("load_wav rejects bad input") {
  CHECK_THROWS_AS(load_wav(temp_path("does_not_exist.wav")), DataError);

  auto empty = temp_path("empty.wav");
  write_raw_wav(empty, 1, 1, 16000, 16, {});
  try {
    load_wav(empty);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("zero-length payload") != std::string::npos);
  }

  auto stereo = temp_path("stereo.wav");
  write_raw_wav(stereo, 1, 2, 16000, 16, {1, 2, 3, 4});
  CHECK_THROWS_AS(load_wav(stereo), DataError);

  auto flt = temp_path("float.wav");
  write_raw_wav(flt, 3, 1, 16000, 16, {1, 2});
  CHECK_THROWS_AS(load_wav(flt), DataError);

  auto junk = temp_path("junk.wav");
  std::ofstream(junk) << "definitely not audio";
  CHECK_THROWS_AS(load_wav(junk), DataError);
}

TEST_CASE("fft agrees with naive dft") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<std::complex<double>> x(64);
  for (auto& v : x) v = {d(rng), d(rng)};
  auto ref = testing::naive_dft(x);
  fft(x);
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(x[k] - ref[k]) < 1e-10);
}

TEST_CASE("frame count formula") {
  MelConfig cfg;
  CHECK(compute_mfcc(tone(440, 16000), cfg).rows == 98);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(400, 3000);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = len(rng);
    CHECK(compute_mel_energies(noise(rng, n), cfg).rows == 1 + (n - 400) / 160);
  }
  CHECK_THROWS_AS(compute_mfcc(tone(440, 399), cfg), DataError);
}

TEST_CASE("all-zero audio gives identical rows") {
  AudioBuffer silent{std::vector<double>(4000, 0.0), 16000};
  auto m = compute_mfcc(silent);
  for (std::size_t t = 1; t < m.rows; ++t)
    for (std::size_t d = 0; d < m.cols; ++d) CHECK(m.at(t, d) == m.at(0, d));
}

TEST_CASE("mel energies of a 1 kHz tone match the naive DFT oracle") {
  MelConfig cfg;
  auto audio = tone(1000.0, 4000);
  auto fast = compute_mel_energies(audio, cfg);
  auto slow = testing::oracle_mel_energies(audio, cfg);
  CHECK(testing::rms_difference(fast.values, slow) < 1e-4);
  // Most energy lands in the filter whose centre is closest to 1 kHz.
  std::size_t best = 0;
  for (std::size_t m = 1; m < cfg.n_mels; ++m)
    if (fast.at(5, m) > fast.at(5, best)) best = m;
  const double step = hz_to_mel(8000.0) / 27.0;
  CHECK(std::abs(mel_to_hz(step * (best + 1)) - 1000.0) < mel_to_hz(step * (best + 2)) - mel_to_hz(step * (best + 1)));
}

TEST_CASE("gain changes only the zeroth cepstral coefficient") {
  std::mt19937_64 rng(5);
  auto a = noise(rng, 3000, 0.1);
  auto louder = a;
  const double g = std::pow(10.0, 6.0 / 20.0);
  for (auto& s : louder.samples) s *= g;
  auto m1 = compute_mfcc(a);
  auto m2 = compute_mfcc(louder);
  for (std::size_t t = 0; t < m1.rows; ++t) {
    CHECK(std::abs(m1.at(t, 0) - m2.at(t, 0)) > 1e-3);
    for (std::size_t d = 1; d < 13; ++d) CHECK(std::abs(m1.at(t, d) - m2.at(t, d)) < 1e-6);
  }
}

TEST_CASE("deltas") {
  FeatureMatrix c(6, 13, FeatureKind::Mfcc13);
  for (auto& v : c.values) v = 3.25;
  for (double v : compute_deltas(c).values) CHECK(v == 0.0);

  FeatureMatrix ramp(10, 13, FeatureKind::Mfcc13);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t d = 0; d < 13; ++d) ramp.at(t, d) = 0.7 * t + d;
  auto dr = compute_deltas(ramp);
  for (std::size_t t = 2; t < 8; ++t)
    for (std::size_t d = 0; d < 13; ++d) CHECK(dr.at(t, d) == doctest::Approx(0.7).epsilon(1e-12));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5, 5);
  FeatureMatrix r(10, 13, FeatureKind::Mfcc13);
  for (auto& v : r.values) v = u(rng);
  auto dd = compute_deltas(r, 2);
  auto ref = testing::oracle_deltas(r, 2);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(dd.values[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("stack_features shape and normalization") {
  std::mt19937_64 rng(2);
  auto audio = noise(rng, 16000);
  auto m = compute_mfcc(audio);
  auto d1 = compute_deltas(m);
  auto d2 = compute_deltas(d1);
  auto s = stack_features(m, d1, d2);
  CHECK(s.rows == 98);
  CHECK(s.cols == 39);
  CHECK(s.kind == FeatureKind::Stacked39);
  for (std::size_t d = 0; d < 39; ++d) {
    double mean = 0, var = 0;
    for (std::size_t t = 0; t < s.rows; ++t) mean += s.at(t, d);
    mean /= s.rows;
    for (std::size_t t = 0; t < s.rows; ++t) var += (s.at(t, d) - mean) * (s.at(t, d) - mean);
    var /= s.rows;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
  // featurize applies delta twice, so delta-delta is delta of delta.
  auto full = featurize(audio);
  for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(full.values[i] == s.values[i]);

  FeatureMatrix constant(5, 13, FeatureKind::Mfcc13);
  for (auto& v : constant.values) v = -2.0;
  auto z = stack_features(constant, constant, constant);
  for (double v : z.values) CHECK(std::abs(v) < 1e-6);

  FeatureMatrix short_one(4, 13, FeatureKind::Mfcc13);
  CHECK_THROWS_AS(stack_features(m, d1, short_one), UsageError);
}

TEST_CASE("stacked features stay finite for extreme inputs") {
  std::mt19937_64 rng(9);
  for (double amp : {0.0, 1e-9, 1.0}) {
    auto a = noise(rng, 2000, amp);
    auto f = featurize(a);
    for (double v : f.values) CHECK(std::isfinite(v));
  }
}

TEST_CASE("mel config validation") {
  MelConfig bad;
  bad.n_ceps = 30;
  CHECK_THROWS_AS(bad.validate(16000), UsageError);
  MelConfig hi;
  hi.fmax_hz = 9000.0;
  CHECK_THROWS_AS(hi.validate(16000), UsageError);
}
