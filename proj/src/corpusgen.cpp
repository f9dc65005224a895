#include "asr/corpusgen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

#include "asr/error.hpp"
#include "asr/lexicon.hpp"

namespace asr::corpusgen {
namespace {

constexpr std::uint64_t kVocabStream = 0x766f636162ULL;
constexpr std::uint64_t kUtteranceStream = 0x757474ULL;
constexpr std::uint64_t kPhoneStream = 0x70686f6e65ULL;
constexpr double kEdgeMs = 5.0;
constexpr std::size_t kPartialsPerBand = 24;

std::mt19937_64 derived_rng(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32), static_cast<std::uint32_t>(c),
                    static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

// Bands as (low, high) Hz, mel-spaced, each covering 70% of its slot.
std::vector<std::array<double, 2>> band_edges(const GenConfig& cfg) {
  const double lo = dsp::hz_to_mel(cfg.consonant_low_hz), hi = dsp::hz_to_mel(cfg.consonant_high_hz);
  const double slot = (hi - lo) / static_cast<double>(cfg.consonant_bands);
  std::vector<std::array<double, 2>> out;
  for (std::size_t b = 0; b < cfg.consonant_bands; ++b) {
    const double centre = lo + slot * (static_cast<double>(b) + 0.5);
    out.push_back({dsp::mel_to_hz(centre - 0.35 * slot), dsp::mel_to_hz(centre + 0.35 * slot)});
  }
  return out;
}

// k-th band combination: all pairs first, then single bands.
std::vector<std::size_t> band_combo(std::size_t k, std::size_t n_bands) {
  for (std::size_t i = 0; i < n_bands; ++i) {
    for (std::size_t j = i + 1; j < n_bands; ++j) {
      if (k-- == 0) return {i, j};
    }
  }
  if (k < n_bands) return {k};
  throw UsageError("not enough consonant band combinations for the inventory");
}

void apply_edges(std::vector<double>& seg, int rate) {
  const auto edge = std::min(seg.size() / 2, static_cast<std::size_t>(std::lround(kEdgeMs * rate / 1000.0)));
  for (std::size_t i = 0; i < edge; ++i) {
    const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(edge));
    seg[i] *= w;
    seg[seg.size() - 1 - i] *= w;
  }
}

std::vector<double> render_phone(phonetics::PhoneId p, const GenConfig& cfg, const phonetics::PhoneInventory& inv) {
  const std::size_t n = cfg.phone_samples();
  const double rate = cfg.sample_rate_hz;
  std::vector<double> seg(n, 0.0);
  if (inv.is_vowel(p)) {
    const auto& f = cfg.vowel_formants.at(inv.symbol(p));
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      seg[i] = 0.3 * std::sin(2 * std::numbers::pi * f[0] * t) + 0.2 * std::sin(2 * std::numbers::pi * f[1] * t);
    }
  } else {
    const auto consonants = inv.consonants();
    const auto ordinal = static_cast<std::size_t>(std::find(consonants.begin(), consonants.end(), p) - consonants.begin());
    const auto bands = band_edges(cfg);
    auto rng = derived_rng(kPhoneStream, static_cast<std::uint64_t>(p));
    std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi), jitter(-0.5, 0.5);
    const auto combo = band_combo(ordinal, cfg.consonant_bands);
    const double amp = 0.5 / std::sqrt(static_cast<double>(combo.size() * kPartialsPerBand));
    for (auto b : combo) {
      const auto [lo, hi] = bands[b];
      for (std::size_t k = 0; k < kPartialsPerBand; ++k) {
        const double freq = lo + (hi - lo) * (static_cast<double>(k) + 0.5 + 0.8 * jitter(rng)) / kPartialsPerBand;
        const double ph = phase(rng);
        for (std::size_t i = 0; i < n; ++i) {
          seg[i] += amp * std::sin(2 * std::numbers::pi * freq * static_cast<double>(i) / rate + ph);
        }
      }
    }
  }
  apply_edges(seg, cfg.sample_rate_hz);
  return seg;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw UsageError(where + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

std::size_t GenConfig::phone_samples() const {
  return static_cast<std::size_t>(std::lround(phone_ms * sample_rate_hz / 1000.0));
}

void GenConfig::validate(const phonetics::PhoneInventory& inv) const {
  if (vocab_size < 2) throw UsageError("corpusgen: vocab_size must be at least 2");
  if (n_utterances == 0) throw UsageError("corpusgen: n_utterances must be positive");
  if (words_min == 0 || words_min > words_max) throw UsageError("corpusgen: bad words per sentence range");
  if (syllables_min == 0 || syllables_min > syllables_max) throw UsageError("corpusgen: bad syllable range");
  if (!(phone_ms > 2 * kEdgeMs)) throw UsageError("corpusgen: phone_ms must exceed the edge ramps");
  if (sample_rate_hz != dsp::kCanonicalRate) throw UsageError("corpusgen: sample rate must be 16000");
  if (!(consonant_low_hz > 0 && consonant_low_hz < consonant_high_hz && consonant_high_hz < sample_rate_hz / 2.0)) {
    throw UsageError("corpusgen: consonant band edges must satisfy 0 < low < high < Nyquist");
  }
  const auto n_combos = consonant_bands * (consonant_bands - 1) / 2 + consonant_bands;
  if (n_combos < inv.consonants().size()) throw UsageError("corpusgen: too few consonant bands for the inventory");
  for (auto v : inv.vowels()) {
    auto it = vowel_formants.find(inv.symbol(v));
    if (it == vowel_formants.end()) throw UsageError("corpusgen: no formants for vowel " + inv.symbol(v));
    for (double f : it->second) {
      if (!(f > 0 && f < sample_rate_hz / 2.0)) throw UsageError("corpusgen: formant outside (0, Nyquist)");
    }
  }
  // Distinct words need enough syllable combinations.
  const double per_syllable = static_cast<double>(inv.consonants().size() * inv.vowels().size());
  if (std::pow(per_syllable, static_cast<double>(syllables_max)) < 2.0 * static_cast<double>(vocab_size)) {
    throw UsageError("corpusgen: vocab_size too large for the syllable range");
  }
}

nlohmann::ordered_json GenConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["vocab_size"] = vocab_size;
  j["n_utterances"] = n_utterances;
  j["words_min"] = words_min;
  j["words_max"] = words_max;
  j["syllables_min"] = syllables_min;
  j["syllables_max"] = syllables_max;
  j["phone_ms"] = phone_ms;
  j["sample_rate_hz"] = sample_rate_hz;
  j["vowel_formants"] = vowel_formants;
  j["consonant_bands"] = consonant_bands;
  j["consonant_low_hz"] = consonant_low_hz;
  j["consonant_high_hz"] = consonant_high_hz;
  j["snr_db"] = snr_db ? nlohmann::ordered_json(*snr_db) : nlohmann::ordered_json();
  return j;
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("corpusgen config must be a JSON object");
  reject_unknown(j,
                 {"seed", "vocab_size", "n_utterances", "words_min", "words_max", "syllables_min", "syllables_max",
                  "phone_ms", "sample_rate_hz", "vowel_formants", "consonant_bands", "consonant_low_hz",
                  "consonant_high_hz", "snr_db"},
                 "corpusgen config");
  GenConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.n_utterances = j.value("n_utterances", c.n_utterances);
    c.words_min = j.value("words_min", c.words_min);
    c.words_max = j.value("words_max", c.words_max);
    c.syllables_min = j.value("syllables_min", c.syllables_min);
    c.syllables_max = j.value("syllables_max", c.syllables_max);
    c.phone_ms = j.value("phone_ms", c.phone_ms);
    c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
    if (j.contains("vowel_formants")) c.vowel_formants = j["vowel_formants"].get<decltype(c.vowel_formants)>();
    c.consonant_bands = j.value("consonant_bands", c.consonant_bands);
    c.consonant_low_hz = j.value("consonant_low_hz", c.consonant_low_hz);
    c.consonant_high_hz = j.value("consonant_high_hz", c.consonant_high_hz);
    if (j.contains("snr_db") && !j["snr_db"].is_null()) c.snr_db = j["snr_db"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("corpusgen config: ") + e.what());
  }
  return c;
}

std::string gen_word(std::mt19937_64& rng, const phonetics::PhoneInventory& inv, const GenConfig& cfg) {
  std::vector<std::string> onsets;
  for (auto c : inv.consonants()) {
    for (const auto& u : inv.at(c).units) onsets.push_back(u);
  }
  std::vector<std::string> vowels;
  for (auto v : inv.vowels()) vowels.push_back(inv.at(v).units.front());
  std::uniform_int_distribution<std::size_t> n_syll(cfg.syllables_min, cfg.syllables_max);
  std::uniform_int_distribution<std::size_t> onset(0, onsets.size() - 1), vowel(0, vowels.size() - 1);
  std::string word;
  for (std::size_t s = n_syll(rng); s > 0; --s) {
    word += onsets[onset(rng)];
    word += vowels[vowel(rng)];
  }
  return word;
}

dsp::AudioBuffer synth_utterance(const phonetics::PhoneSeq& phones, const GenConfig& cfg,
                                 const phonetics::PhoneInventory& inv) {
  if (phones.empty()) throw UsageError("synth_utterance: empty phone sequence");
  std::map<phonetics::PhoneId, std::vector<double>> cache;
  dsp::AudioBuffer out;
  out.sample_rate_hz = cfg.sample_rate_hz;
  out.samples.reserve(phones.size() * cfg.phone_samples());
  for (auto p : phones) {
    auto it = cache.find(p);
    if (it == cache.end()) it = cache.emplace(p, render_phone(p, cfg, inv)).first;
    out.samples.insert(out.samples.end(), it->second.begin(), it->second.end());
  }
  return out;
}

std::set<int> peak_bins(const std::vector<double>& segment, int sample_rate_hz) {
  std::size_t n = 1;
  while (n < segment.size()) n <<= 1;
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < segment.size(); ++i) buf[i] = segment[i];
  dsp::fft(buf);
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
  const double peak = *std::max_element(mag.begin(), mag.end());
  std::set<int> bins;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    if (mag[k] >= 0.25 * peak) {
      bins.insert(static_cast<int>(static_cast<double>(k) * sample_rate_hz / static_cast<double>(n) / 250.0));
    }
  }
  return bins;
}

void check_phone_distinctness(const GenConfig& cfg, const phonetics::PhoneInventory& inv) {
  std::map<std::set<int>, phonetics::PhoneId> seen;
  for (const auto& ph : inv.phones()) {
    auto bins = peak_bins(render_phone(ph.index, cfg, inv), cfg.sample_rate_hz);
    auto [it, fresh] = seen.emplace(bins, ph.index);
    if (!fresh) {
      throw VerificationError("corpusgen: phones '" + inv.symbol(it->second) + "' and '" + ph.symbol +
                              "' have identical spectral peaks");
    }
  }
}

Corpus generate_corpus(const GenConfig& cfg, const std::filesystem::path& out_dir,
                       const phonetics::PhoneInventory& inv) {
  cfg.validate(inv);
  check_phone_distinctness(cfg, inv);

  auto vocab_rng = derived_rng(cfg.seed, kVocabStream);
  std::set<std::string> vocab_set;
  while (vocab_set.size() < cfg.vocab_size) vocab_set.insert(gen_word(vocab_rng, inv, cfg));
  Corpus corpus;
  corpus.vocab.assign(vocab_set.begin(), vocab_set.end());
  auto built = lexicon::build_lexicon(corpus.vocab, inv);
  if (!built.skipped.empty()) throw VerificationError("corpusgen: generated word failed g2p: " + built.skipped.front());
  const auto& lex = built.lexicon;

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wav", ec);
  if (ec) throw DataError("cannot create " + (out_dir / "wav").string() + ": " + ec.message());

  const auto width = std::to_string(cfg.n_utterances - 1).size();
  for (std::size_t u = 0; u < cfg.n_utterances; ++u) {
    auto rng = derived_rng(cfg.seed, kUtteranceStream, u);
    std::uniform_int_distribution<std::size_t> n_words(cfg.words_min, cfg.words_max);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.vocab.size() - 1);
    std::vector<std::string> words(n_words(rng));
    phonetics::PhoneSeq phones;
    for (auto& w : words) {
      w = corpus.vocab[pick(rng)];
      const auto& pron = lex.pronunciation(*lex.find(w));
      phones.insert(phones.end(), pron.begin(), pron.end());
    }
    auto audio = synth_utterance(phones, cfg, inv);
    if (cfg.snr_db) {
      double power = 0;
      for (double s : audio.samples) power += s * s;
      power /= static_cast<double>(audio.size());
      std::normal_distribution<double> noise(0.0, std::sqrt(power / std::pow(10.0, *cfg.snr_db / 10.0)));
      for (auto& s : audio.samples) s += noise(rng);
    }
    std::string id = std::to_string(u);
    id = "utt" + std::string(width - id.size(), '0') + id;
    manifest::Record r;
    r.id = id;
    r.audio = out_dir / "wav" / (id + ".wav");
    std::ostringstream text;
    for (std::size_t i = 0; i < words.size(); ++i) text << (i ? " " : "") << words[i];
    r.text = text.str();
    r.duration_s = audio.duration_s();
    dsp::write_wav(r.audio, audio);
    corpus.manifest.records.push_back(std::move(r));
  }

  corpus.manifest_path = out_dir / "manifest.jsonl";
  manifest::save_manifest(corpus.manifest, corpus.manifest_path);
  lex.save((out_dir / "lexicon.txt").string(), inv);
  std::ofstream(out_dir / "phones.txt") << inv.to_text();
  std::ofstream(out_dir / "corpus.json") << cfg.to_json().dump(2) << '\n';
  return corpus;
}

}  // namespace asr::corpusgen
