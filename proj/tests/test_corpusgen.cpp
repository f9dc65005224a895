#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "asr/corpusgen.hpp"
#include "asr/error.hpp"
#include "asr/lexicon.hpp"
#include "doctest.h"

using namespace asr;
using corpusgen::GenConfig;

namespace {

const phonetics::PhoneInventory& inv() { return phonetics::default_inventory(); }

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("asr_corpusgen_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Naive DFT magnitude at integer bin k.
double dft_mag(const std::vector<double>& x, std::size_t k) {
  double re = 0, im = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = -2 * std::numbers::pi * static_cast<double>(k * i) / n;
    re += x[i] * std::cos(a);
    im += x[i] * std::sin(a);
  }
  return std::hypot(re, im);
}

}  // namespace

TEST_CASE("generated words round-trip through g2p within syllable bounds") {
  GenConfig cfg;
  std::mt19937_64 a(11), b(11);
  for (int i = 0; i < 500; ++i) {
    const auto w = corpusgen::gen_word(a, inv(), cfg);
    CHECK(w == corpusgen::gen_word(b, inv(), cfg));
    phonetics::PhoneSeq phones;
    REQUIRE_NOTHROW(phones = phonetics::g2p(w, inv()));
    std::size_t vowels = 0;
    for (std::size_t j = 0; j < phones.size(); ++j) {
      // strict CV alternation
      CHECK(inv().is_vowel(phones[j]) == (j % 2 == 1));
      vowels += inv().is_vowel(phones[j]);
    }
    CHECK(vowels >= 1);
    CHECK(vowels <= 4);
  }
}

TEST_CASE("utterance length and determinism") {
  GenConfig cfg;
  const phonetics::PhoneSeq four{5, 0, 6, 1};
  const auto audio = corpusgen::synth_utterance(four, cfg, inv());
  CHECK(audio.size() == 5120);
  CHECK(audio.sample_rate_hz == 16000);
  CHECK(corpusgen::synth_utterance(four, cfg, inv()).samples == audio.samples);
  // Identical phones render identically at any position.
  const auto pair = corpusgen::synth_utterance({5, 5}, cfg, inv());
  CHECK(std::equal(pair.samples.begin(), pair.samples.begin() + 1280, pair.samples.begin() + 1280));
  CHECK_THROWS_AS(corpusgen::synth_utterance({}, cfg, inv()), UsageError);
}

TEST_CASE("vowel /a/ peaks at its formant bins") {
  GenConfig cfg;
  const auto a = inv().index_of("a");
  const auto seg = corpusgen::synth_utterance({a}, cfg, inv()).samples;
  // 1280 samples at 16 kHz: bin spacing 12.5 Hz, so 730 and 1090 Hz are bins 58.4 and 87.2.
  std::vector<std::pair<double, std::size_t>> mags;
  for (std::size_t k = 1; k < 640; ++k) mags.emplace_back(dft_mag(seg, k), k);
  std::sort(mags.rbegin(), mags.rend());
  std::set<std::size_t> top;
  for (int i = 0; i < 4; ++i) top.insert(mags[i].second);
  CHECK((top.count(58) + top.count(59)) >= 1);
  CHECK((top.count(87) + top.count(88)) >= 1);
  for (auto k : top) CHECK(((k >= 57 && k <= 60) || (k >= 86 && k <= 89)));
}

TEST_CASE("every phone of the inventory is spectrally distinct") {
  CHECK_NOTHROW(corpusgen::check_phone_distinctness(GenConfig{}, inv()));
  GenConfig clash;
  clash.vowel_formants["e"] = clash.vowel_formants["a"];
  CHECK_THROWS_AS(corpusgen::check_phone_distinctness(clash, inv()), VerificationError);
}

TEST_CASE("config validation and JSON") {
  GenConfig c;
  c.vocab_size = 1;
  CHECK_THROWS_AS(c.validate(inv()), UsageError);
  c = {};
  c.phone_ms = 0;
  CHECK_THROWS_AS(c.validate(inv()), UsageError);
  c = {};
  c.snr_db = 20;
  c.seed = 99;
  const auto back = GenConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());
  CHECK_THROWS_AS(GenConfig::from_json(nlohmann::json{{"vocab", 3}}), UsageError);
  CHECK_THROWS_AS(GenConfig::from_json(nlohmann::json{{"seed", "x"}}), UsageError);
}

TEST_CASE("generate_corpus counts, durations, coverage and determinism") {
  GenConfig cfg;
  cfg.n_utterances = 20;
  cfg.vocab_size = 10;
  cfg.seed = 7;
  const auto d1 = scratch("a"), d2 = scratch("b");
  const auto c1 = corpusgen::generate_corpus(cfg, d1);
  corpusgen::generate_corpus(cfg, d2);

  CHECK(c1.vocab.size() == 10);
  REQUIRE(c1.manifest.records.size() == 20);
  std::size_t wavs = 0;
  for (const auto& e : std::filesystem::directory_iterator(d1 / "wav")) wavs += e.path().extension() == ".wav";
  CHECK(wavs == 20);

  const auto reloaded = manifest::load_manifest(d1 / "manifest.jsonl");
  CHECK(reloaded.records.size() == 20);
  auto lex = lexicon::Lexicon::load((d1 / "lexicon.txt").string(), inv());
  for (const auto& r : reloaded.records) {
    std::size_t phones = 0;
    std::istringstream words(r.text);
    for (std::string w; words >> w;) {
      auto id = lex.find(w);
      REQUIRE(id.has_value());
      phones += lex.pronunciation(*id).size();
    }
    const auto audio = dsp::load_wav(r.audio);
    CHECK(audio.size() == phones * 1280);
    CHECK(std::abs(*r.duration_s - phones * 0.08) <= 1.0 / 16000);
    CHECK(slurp(r.audio) == slurp(d2 / "wav" / r.audio.filename()));
  }
  CHECK(slurp(d1 / "manifest.jsonl") == slurp(d2 / "manifest.jsonl"));
  CHECK(slurp(d1 / "lexicon.txt") == slurp(d2 / "lexicon.txt"));

  cfg.seed = 8;
  const auto c3 = corpusgen::generate_corpus(cfg, scratch("c"));
  CHECK(c3.vocab != c1.vocab);
}
