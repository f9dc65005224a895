#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "asr/acoustic.hpp"
#include "asr/augment.hpp"
#include "asr/checkpoint.hpp"
#include "asr/decoder.hpp"
#include "asr/lexicon.hpp"
#include "asr/lm.hpp"
#include "asr/manifest.hpp"
#include "asr/metrics.hpp"
#include "asr/nn/optim.hpp"
#include "asr/phonetics.hpp"
#include "json.hpp"

namespace asr::pipeline {

enum class Schedule {
  Interleaved,  // acoustic and LM epochs share one early-stopping clock
  Separate,     // acoustic loop first, then an LM loop stopped on validation cross-entropy
};

struct WarmStartConfig {
  std::filesystem::path checkpoint;
  std::vector<std::string> freeze;  // parameter-name prefixes
};

struct TrainConfig {
  std::uint64_t seed = 0;
  manifest::Ratios split{0.8, 0.1, 0.1};
  std::size_t epochs_max = 100;
  std::size_t patience = 10;
  std::size_t batch_size = 1;     // utterances per acoustic update
  std::size_t lm_batch_size = 1;  // sentences per LM update
  Schedule schedule = Schedule::Interleaved;
  nn::OptimizerConfig optimizer{nn::OptimizerKind::Adam, 1e-3};
  nn::OptimizerConfig lm_optimizer{nn::OptimizerKind::Adam, 1e-3};
  augment::AugmentPolicy augment;
  acoustic::AcousticConfig acoustic;
  lm::LmConfig lm;
  lm::Granularity lm_granularity = lm::Granularity::Phone;
  decoder::DecodeOptions decode;
  std::optional<WarmStartConfig> warm_start;
  bool monitor_train_per = false;  // also greedy-decode the training split each epoch

  // Throws UsageError.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  // Every key is optional; unknown keys at any level are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
};

// Stops once the monitored value has failed to improve strictly for
// `patience` consecutive epochs.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience);

  // Records the next epoch's value; true when it is a new best.
  bool update(double value);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
  double best_value() const { return best_; }
  std::size_t epochs() const { return epochs_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::string phase = "joint";  // "joint", "acoustic" or "lm"
  double train_ctc = 0.0;       // mean per utterance
  double train_lm = 0.0;        // mean per token
  double val_ctc = 0.0;
  double val_lm = 0.0;
  double val_per = 0.0;
  std::optional<double> train_per;
  std::size_t skipped = 0;
  bool improved = false;

  nlohmann::ordered_json to_json() const;
};

struct WarmStartReport {
  std::vector<std::string> copied;
  std::vector<std::string> reinitialized;
};

// Copies every tensor of `source` into `target` (a freshly built model).
// Output layers whose shapes differ keep their fresh initialization and are
// reported; any other mismatch throws DataError.
WarmStartReport warm_start(const nn::Parameters& source, nn::Parameters& target);

struct TrainResult {
  checkpoint::Checkpoint checkpoint;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  bool early_stopped = false;
  std::string best_hash;      // parameters_hash of the best-epoch snapshot
  std::string restored_hash;  // parameters_hash of the emitted checkpoint
  std::size_t skipped = 0;    // utterance-epochs dropped for data errors
  std::optional<WarmStartReport> warm;
  manifest::Split split;

  nlohmann::ordered_json to_json() const;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(const std::string&)> warn;
};

// Splits `m`, builds the lexicon from every transcript, trains, and restores
// the best-epoch parameters.
TrainResult train(const TrainConfig& cfg, const manifest::Manifest& m, const TrainHooks& hooks = {},
                  const phonetics::PhoneInventory& inv = phonetics::default_inventory());

// Everything needed to decode, rebuilt from a checkpoint.
struct Model {
  phonetics::PhoneInventory inventory;
  lexicon::Lexicon lexicon;
  lm::TokenVocab vocab;
  nn::Parameters params;
  decoder::DecodeOptions decode;

  static Model from_checkpoint(const checkpoint::Checkpoint& ckpt);
};

struct Hypothesis {
  std::vector<std::string> words;
  phonetics::PhoneSeq phones;         // pronunciation of `words`
  phonetics::PhoneSeq greedy_phones;  // best-path CTC phones
  std::vector<std::string> greedy_words;
  decoder::Transcript transcript;
};

Hypothesis decode_audio(const Model& model, const dsp::AudioBuffer& audio, const decoder::DecodeOptions& opts);

// Scores beam + LM decoding against the references and reports the greedy
// no-LM ablation alongside. Failing utterances are skipped and counted.
metrics::MetricsReport evaluate(const Model& model, const manifest::Manifest& split,
                                const decoder::DecodeOptions& opts,
                                const std::function<void(const std::string&)>& warn = {});

// Reference phones for a transcript: pronunciations from the lexicon, g2p for
// words outside it.
phonetics::PhoneSeq reference_phones(const std::vector<std::string>& words, const lexicon::Lexicon& lex,
                                     const phonetics::PhoneInventory& inv);

}  // namespace asr::pipeline
