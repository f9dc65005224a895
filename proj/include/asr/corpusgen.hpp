#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "asr/dsp.hpp"
#include "asr/manifest.hpp"
#include "asr/phonetics.hpp"
#include "json.hpp"

namespace asr::corpusgen {

struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t vocab_size = 50;
  std::size_t n_utterances = 300;
  std::size_t words_min = 2, words_max = 6;
  std::size_t syllables_min = 1, syllables_max = 4;
  double phone_ms = 80.0;
  int sample_rate_hz = 16000;
  // Two formants per vowel symbol, in Hz.
  std::map<std::string, std::array<double, 2>> vowel_formants{
      {"a", {730, 1090}}, {"e", {530, 1840}}, {"i", {270, 2290}}, {"o", {570, 840}}, {"u", {300, 870}}};
  // Consonants are noise bursts in one or two of `consonant_bands` bands,
  // mel-spaced between the two edges.
  std::size_t consonant_bands = 10;
  double consonant_low_hz = 2000.0;
  double consonant_high_hz = 7600.0;
  // White noise at this SNR is added per utterance; none when unset.
  std::optional<double> snr_db;

  void validate(const phonetics::PhoneInventory& inv) const;
  nlohmann::ordered_json to_json() const;
  // Unknown keys are rejected.
  static GenConfig from_json(const nlohmann::json& j);

  std::size_t phone_samples() const;
};

// 1..4 CV syllables; onsets from the consonant units, vowels from a e i o u.
std::string gen_word(std::mt19937_64& rng, const phonetics::PhoneInventory& inv, const GenConfig& cfg);

// Exactly |phones| * phone_samples() samples. Identical phones render
// identically wherever they occur.
dsp::AudioBuffer synth_utterance(const phonetics::PhoneSeq& phones, const GenConfig& cfg,
                                 const phonetics::PhoneInventory& inv);

// Coarse (250 Hz) DFT bins holding at least a quarter of the segment's peak
// magnitude.
std::set<int> peak_bins(const std::vector<double>& segment, int sample_rate_hz);

// Renders every phone alone and requires pairwise different peak-bin sets.
// Throws VerificationError naming the first clash.
void check_phone_distinctness(const GenConfig& cfg, const phonetics::PhoneInventory& inv);

struct Corpus {
  manifest::Manifest manifest;
  std::vector<std::string> vocab;
  std::filesystem::path manifest_path;
};

// Writes wav/<id>.wav, manifest.jsonl, lexicon.txt, phones.txt and
// corpus.json under out_dir.
Corpus generate_corpus(const GenConfig& cfg, const std::filesystem::path& out_dir,
                       const phonetics::PhoneInventory& inv = phonetics::default_inventory());

}  // namespace asr::corpusgen
