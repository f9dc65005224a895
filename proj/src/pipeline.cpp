#include "asr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "asr/error.hpp"
#include "asr/nn/ops.hpp"

namespace asr::pipeline {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kOrderStream = 0x6f72646572ULL;
constexpr std::uint64_t kAugmentStream = 0x6175676dULL;
constexpr std::uint64_t kAcousticInit = 0x61636fULL;
constexpr std::uint64_t kLmInit = 0x6c6dULL;

std::mt19937_64 derived_rng(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) { return derived_rng({seed, stream})(); }

// Reads an object field by field; finish() rejects whatever was not read.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw UsageError(where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw UsageError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw UsageError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ordered_json optimizer_json(const nn::OptimizerConfig& o) {
  return {{"kind", o.kind == nn::OptimizerKind::Adam ? "adam" : "sgd"},
          {"learning_rate", o.learning_rate},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon}};
}

nn::OptimizerConfig optimizer_from(const json& j, const std::string& where, nn::OptimizerConfig o) {
  Reader r(j, where);
  std::string kind = o.kind == nn::OptimizerKind::Adam ? "adam" : "sgd";
  r.get("kind", kind);
  if (kind == "adam") {
    o.kind = nn::OptimizerKind::Adam;
  } else if (kind == "sgd") {
    o.kind = nn::OptimizerKind::Sgd;
  } else {
    throw UsageError(where + ".kind: expected adam or sgd, got '" + kind + "'");
  }
  r.get("learning_rate", o.learning_rate);
  r.get("beta1", o.beta1);
  r.get("beta2", o.beta2);
  r.get("epsilon", o.epsilon);
  r.finish();
  return o;
}

void validate_optimizer(const nn::OptimizerConfig& o, const std::string& where) {
  if (!(o.learning_rate > 0)) throw UsageError(where + ": learning_rate must be positive");
  if (!(o.beta1 >= 0 && o.beta1 < 1 && o.beta2 >= 0 && o.beta2 < 1)) throw UsageError(where + ": betas must lie in [0, 1)");
  if (!(o.epsilon > 0)) throw UsageError(where + ": epsilon must be positive");
}

bool is_output_layer(const std::string& name) {
  return name.rfind("acoustic.output.", 0) == 0 || name.rfind("lm.output.", 0) == 0 || name == "lm.embedding";
}

// Parameters aliasing the tensors of `all` under `prefix`.
nn::Parameters view(nn::Parameters& all, const std::string& prefix) {
  nn::Parameters out;
  for (auto& [name, t] : all) {
    if (name.rfind(prefix, 0) == 0) out.add(name, t);
  }
  return out;
}

void assign(nn::Parameters& dst, const nn::Parameters& src, const std::string& prefix) {
  for (auto& [name, t] : dst) {
    if (name.rfind(prefix, 0) != 0) continue;
    auto from = src.at(name).values();
    std::copy(from.begin(), from.end(), t.mutable_values().begin());
  }
}

struct Utterance {
  std::string id;
  dsp::AudioBuffer audio;
  dsp::FeatureMatrix clean;
  phonetics::PhoneSeq target;
  lm::TokenSeq tokens;
};

std::vector<std::string> transcript_words(const std::string& text) {
  return metrics::tokenize(metrics::normalize_text(text));
}

std::vector<Utterance> prepare(const manifest::Manifest& m, const lexicon::Lexicon& lex, const lm::TokenVocab& vocab,
                               const phonetics::PhoneInventory& inv, std::size_t& skipped, const TrainHooks& hooks) {
  std::vector<Utterance> out;
  for (const auto& r : m.records) {
    try {
      Utterance u;
      u.id = r.id;
      const auto words = transcript_words(r.text);
      if (words.empty()) throw DataError("empty transcript");
      u.target = reference_phones(words, lex, inv);
      u.tokens = vocab.encode(words, lex);
      u.audio = dsp::load_wav(r.audio);
      u.clean = dsp::featurize(u.audio);
      if (acoustic::downsampled_frames(u.clean.rows) < acoustic::ctc_min_frames(u.target)) {
        throw DataError("audio too short for its transcript");
      }
      out.push_back(std::move(u));
    } catch (const DataError& e) {
      ++skipped;
      if (hooks.warn) hooks.warn("skipping " + r.id + ": " + e.what());
    }
  }
  return out;
}

struct Validation {
  double ctc = 0.0;
  double lm = 0.0;
  double per = 0.0;
};

double greedy_per(const nn::Parameters& params, const std::vector<Utterance>& utts) {
  metrics::PhonePairs pairs;
  for (const auto& u : utts) {
    pairs.push_back({u.target, acoustic::ctc_greedy_decode(acoustic::acoustic_forward(params, u.clean))});
  }
  return metrics::per(pairs);
}

double lm_cross_entropy(const nn::Parameters& params, const std::vector<Utterance>& utts) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& u : utts) {
    total -= lm::lm_score(params, u.tokens);
    tokens += u.tokens.size() + 1;
  }
  return total / static_cast<double>(tokens);
}

Validation validate_split(const nn::Parameters& params, const std::vector<Utterance>& utts) {
  Validation v;
  metrics::PhonePairs pairs;
  for (const auto& u : utts) {
    const auto grid = acoustic::acoustic_forward(params, u.clean);
    v.ctc += acoustic::ctc_loss(grid, u.target);
    pairs.push_back({u.target, acoustic::ctc_greedy_decode(grid)});
  }
  v.ctc /= static_cast<double>(utts.size());
  v.per = metrics::per(pairs);
  v.lm = lm_cross_entropy(params, utts);
  return v;
}

// One shuffled pass of CTC training; returns the mean loss per used utterance.
double acoustic_epoch(const TrainConfig& cfg, nn::Parameters& params, nn::OptimizerState& opt,
                      const std::vector<Utterance>& utts, const std::vector<std::size_t>& order, std::size_t epoch,
                      std::size_t& skipped, const TrainHooks& hooks) {
  auto ac = view(params, "acoustic.");
  double total = 0.0;
  std::size_t used = 0, pending = 0;
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
  for (std::size_t idx : order) {
    const auto& u = utts[idx];
    try {
      dsp::FeatureMatrix f;
      if (cfg.augment.enabled) {
        auto rng = derived_rng({cfg.seed, kAugmentStream, cfg.augment.seed, epoch, idx});
        f = augment::spec_augment(dsp::featurize(augment::perturb_waveform(u.audio, cfg.augment, rng)), cfg.augment,
                                  rng);
      } else {
        f = u.clean;
      }
      auto loss = acoustic::ctc_loss(acoustic::acoustic_log_probs(params, f), u.target);
      if (!std::isfinite(loss.item())) throw VerificationError("non-finite CTC loss on " + u.id);
      nn::backward(nn::scale(loss, inv_batch));
      total += loss.item();
      ++used;
      ++pending;
    } catch (const DataError& e) {
      ++skipped;
      if (hooks.warn) hooks.warn("epoch " + std::to_string(epoch) + ": skipping " + u.id + ": " + e.what());
    }
    if (pending == cfg.batch_size) {
      nn::optimizer_step(opt, ac);
      pending = 0;
    }
  }
  if (pending > 0) nn::optimizer_step(opt, ac);
  if (used == 0) throw DataError("every training utterance failed in epoch " + std::to_string(epoch));
  if (2 * (order.size() - used) > order.size()) {
    throw DataError("more than half of the training utterances failed in epoch " + std::to_string(epoch));
  }
  return total / static_cast<double>(used);
}

double lm_epoch(const TrainConfig& cfg, nn::Parameters& params, nn::OptimizerState& opt,
                const std::vector<Utterance>& utts, const std::vector<std::size_t>& order) {
  auto lmp = view(params, "lm.");
  std::vector<lm::TokenSeq> corpus;
  for (auto idx : order) corpus.push_back(utts[idx].tokens);
  return lm::lm_train_epoch(lmp, corpus, opt, cfg.lm_batch_size);
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = derived_rng({seed, kOrderStream, epoch});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

// ---- config -----------------------------------------------------------------

void TrainConfig::validate() const {
  const double sum = split[0] + split[1] + split[2];
  if (!(split[0] > 0 && split[1] > 0 && split[2] > 0) || std::abs(sum - 1.0) > 1e-9) {
    throw UsageError("split ratios must be positive and sum to 1");
  }
  if (epochs_max == 0) throw UsageError("epochs_max must be at least 1");
  if (patience == 0) throw UsageError("patience must be at least 1");
  if (batch_size == 0 || lm_batch_size == 0) throw UsageError("batch sizes must be at least 1");
  validate_optimizer(optimizer, "optimizer");
  validate_optimizer(lm_optimizer, "lm_optimizer");
  augment.validate(acoustic::kFeatureDim);
  acoustic.validate();
  lm.validate();
  if (decode.beam == 0) throw UsageError("decode.beam must be at least 1");
  if (!std::isfinite(decode.lm_weight) || decode.lm_weight < 0) throw UsageError("decode.lm_weight must be >= 0");
  if (!std::isfinite(decode.word_bonus)) throw UsageError("decode.word_bonus must be finite");
  if (warm_start && warm_start->checkpoint.empty()) throw UsageError("warm_start.checkpoint must name a file");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["split"] = split;
  j["epochs_max"] = epochs_max;
  j["patience"] = patience;
  j["batch_size"] = batch_size;
  j["lm_batch_size"] = lm_batch_size;
  j["schedule"] = schedule == Schedule::Interleaved ? "interleaved" : "separate";
  j["optimizer"] = optimizer_json(optimizer);
  j["lm_optimizer"] = optimizer_json(lm_optimizer);
  j["augment"] = {{"enabled", augment.enabled},
                  {"speed_factors", augment.speed_factors},
                  {"gain_db_min", augment.gain_db_min},
                  {"gain_db_max", augment.gain_db_max},
                  {"n_freq_masks", augment.n_freq_masks},
                  {"freq_mask_max", augment.freq_mask_max},
                  {"n_time_masks", augment.n_time_masks},
                  {"time_mask_max_fraction", augment.time_mask_max_fraction},
                  {"seed", augment.seed}};
  j["acoustic"] = {{"conv1_filters", acoustic.conv1_filters}, {"conv2_filters", acoustic.conv2_filters},
                   {"kernel_size", acoustic.kernel_size},     {"dense_units", acoustic.dense_units},
                   {"use_attention", acoustic.use_attention}, {"paper_faithful", acoustic.paper_faithful}};
  j["lm"] = {{"granularity", lm::granularity_name(lm_granularity)},
             {"embed_dim", lm.embed_dim},
             {"lstm1_units", lm.lstm1_units},
             {"lstm2_units", lm.lstm2_units},
             {"paper_faithful", lm.paper_faithful}};
  j["decode"] = {{"lm_weight", decode.lm_weight}, {"word_bonus", decode.word_bonus}, {"beam", decode.beam}};
  if (warm_start) {
    j["warm_start"] = {{"checkpoint", warm_start->checkpoint.string()}, {"freeze", warm_start->freeze}};
  } else {
    j["warm_start"] = nullptr;
  }
  j["monitor_train_per"] = monitor_train_per;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  Reader r(j, "config");
  r.get("seed", c.seed);
  r.get("split", c.split);
  r.get("epochs_max", c.epochs_max);
  r.get("patience", c.patience);
  r.get("batch_size", c.batch_size);
  r.get("lm_batch_size", c.lm_batch_size);
  std::string schedule = "interleaved";
  r.get("schedule", schedule);
  if (schedule == "interleaved") {
    c.schedule = Schedule::Interleaved;
  } else if (schedule == "separate") {
    c.schedule = Schedule::Separate;
  } else {
    throw UsageError("config.schedule: expected interleaved or separate, got '" + schedule + "'");
  }
  if (auto* o = r.sub("optimizer")) c.optimizer = optimizer_from(*o, "config.optimizer", c.optimizer);
  if (auto* o = r.sub("lm_optimizer")) c.lm_optimizer = optimizer_from(*o, "config.lm_optimizer", c.lm_optimizer);
  if (auto* a = r.sub("augment")) {
    Reader ar(*a, "config.augment");
    ar.get("enabled", c.augment.enabled);
    ar.get("speed_factors", c.augment.speed_factors);
    ar.get("gain_db_min", c.augment.gain_db_min);
    ar.get("gain_db_max", c.augment.gain_db_max);
    ar.get("n_freq_masks", c.augment.n_freq_masks);
    ar.get("freq_mask_max", c.augment.freq_mask_max);
    ar.get("n_time_masks", c.augment.n_time_masks);
    ar.get("time_mask_max_fraction", c.augment.time_mask_max_fraction);
    ar.get("seed", c.augment.seed);
    ar.finish();
  }
  if (auto* a = r.sub("acoustic")) {
    Reader ar(*a, "config.acoustic");
    ar.get("conv1_filters", c.acoustic.conv1_filters);
    ar.get("conv2_filters", c.acoustic.conv2_filters);
    ar.get("kernel_size", c.acoustic.kernel_size);
    ar.get("dense_units", c.acoustic.dense_units);
    ar.get("use_attention", c.acoustic.use_attention);
    ar.get("paper_faithful", c.acoustic.paper_faithful);
    ar.finish();
  }
  if (auto* l = r.sub("lm")) {
    Reader lr(*l, "config.lm");
    std::string g = lm::granularity_name(c.lm_granularity);
    lr.get("granularity", g);
    c.lm_granularity = lm::parse_granularity(g);
    lr.get("embed_dim", c.lm.embed_dim);
    lr.get("lstm1_units", c.lm.lstm1_units);
    lr.get("lstm2_units", c.lm.lstm2_units);
    lr.get("paper_faithful", c.lm.paper_faithful);
    lr.finish();
  }
  if (auto* d = r.sub("decode")) {
    Reader dr(*d, "config.decode");
    dr.get("lm_weight", c.decode.lm_weight);
    dr.get("word_bonus", c.decode.word_bonus);
    dr.get("beam", c.decode.beam);
    dr.finish();
  }
  if (auto* w = r.sub("warm_start")) {
    Reader wr(*w, "config.warm_start");
    WarmStartConfig ws;
    std::string path;
    wr.get("checkpoint", path);
    ws.checkpoint = path;
    wr.get("freeze", ws.freeze);
    wr.finish();
    c.warm_start = ws;
  }
  r.get("monitor_train_per", c.monitor_train_per);
  r.finish();
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ---- early stopping ---------------------------------------------------------

EarlyStopper::EarlyStopper(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience == 0) throw UsageError("patience must be at least 1");
}

bool EarlyStopper::update(double value) {
  ++epochs_;
  if (value < best_) {
    best_ = value;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

// ---- logs -------------------------------------------------------------------

nlohmann::ordered_json EpochLog::to_json() const {
  ordered_json j{{"epoch", epoch},     {"phase", phase},     {"train_ctc", train_ctc}, {"train_lm", train_lm},
                 {"val_ctc", val_ctc}, {"val_lm", val_lm},   {"val_per", val_per},     {"skipped", skipped},
                 {"improved", improved}};
  if (train_per) j["train_per"] = *train_per;
  return j;
}

nlohmann::ordered_json TrainResult::to_json() const {
  ordered_json j;
  j["best_epoch"] = best_epoch;
  j["epochs_run"] = epochs_run;
  j["early_stopped"] = early_stopped;
  j["best_val_per"] = checkpoint.best_val_per ? ordered_json(*checkpoint.best_val_per) : ordered_json();
  j["best_hash"] = best_hash;
  j["restored_hash"] = restored_hash;
  j["skipped"] = skipped;
  j["split"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
  if (warm) j["warm_start"] = {{"copied", warm->copied}, {"reinitialized", warm->reinitialized}};
  j["epochs"] = ordered_json::array();
  for (const auto& e : log) j["epochs"].push_back(e.to_json());
  return j;
}

// ---- warm start -------------------------------------------------------------

WarmStartReport warm_start(const nn::Parameters& source, nn::Parameters& target) {
  WarmStartReport report;
  for (const auto& [name, t] : source) {
    if (!target.contains(name)) throw DataError("warm start: checkpoint tensor '" + name + "' has no counterpart");
  }
  for (auto& [name, t] : target) {
    if (!source.contains(name)) throw DataError("warm start: checkpoint lacks tensor '" + name + "'");
    const auto& src = source.at(name);
    if (src.shape() == t.shape()) {
      std::copy(src.values().begin(), src.values().end(), t.mutable_values().begin());
      report.copied.push_back(name);
    } else if (is_output_layer(name)) {
      report.reinitialized.push_back(name);
    } else {
      throw DataError("warm start: incompatible shape for '" + name + "': checkpoint " + nn::shape_string(src.shape()) +
                      ", model " + nn::shape_string(t.shape()));
    }
  }
  return report;
}

// ---- training ---------------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const manifest::Manifest& m, const TrainHooks& hooks,
                  const phonetics::PhoneInventory& inv) {
  cfg.validate();
  if (m.empty()) throw DataError("training manifest is empty");
  TrainResult result;
  result.split = manifest::split_corpus(m, cfg.split, cfg.seed);

  std::vector<std::string> all_words;
  for (const auto& r : m.records) {
    for (auto& w : transcript_words(r.text)) all_words.push_back(std::move(w));
  }
  auto built = lexicon::build_lexicon(all_words, inv);
  for (const auto& w : built.skipped) {
    if (hooks.warn) hooks.warn("word '" + w + "' has no pronunciation");
  }
  const auto& lex = built.lexicon;

  lm::TokenVocab vocab;
  if (cfg.lm_granularity == lm::Granularity::Phone) {
    vocab = lm::TokenVocab::for_phones(inv);
  } else {
    std::vector<std::string> train_words;
    for (const auto& r : result.split.train.records) {
      for (auto& w : transcript_words(r.text)) train_words.push_back(std::move(w));
    }
    vocab = lm::TokenVocab::for_words(train_words);
  }

  const auto train_utts = prepare(result.split.train, lex, vocab, inv, result.skipped, hooks);
  const auto val_utts = prepare(result.split.val, lex, vocab, inv, result.skipped, hooks);
  if (train_utts.empty()) throw DataError("every training utterance failed to load");
  if (2 * train_utts.size() < result.split.train.size()) {
    throw DataError("more than half of the training utterances failed to load");
  }
  if (val_utts.empty()) throw DataError("every validation utterance failed to load");

  nn::Parameters params = acoustic::build_acoustic_model(cfg.acoustic, inv.size(), derived_seed(cfg.seed, kAcousticInit));
  for (auto& [name, t] : lm::build_lm(vocab.size(), cfg.lm, derived_seed(cfg.seed, kLmInit))) params.add(name, t);

  nn::OptimizerState opt(cfg.optimizer), lm_opt(cfg.lm_optimizer);
  if (cfg.warm_start) {
    const auto src = checkpoint::load_checkpoint(cfg.warm_start->checkpoint);
    result.warm = warm_start(src.params, params);
    for (const auto& prefix : cfg.warm_start->freeze) {
      const bool any = std::any_of(params.begin(), params.end(),
                                   [&](const auto& kv) { return kv.first.rfind(prefix, 0) == 0; });
      if (!any) throw UsageError("warm_start.freeze prefix '" + prefix + "' matches no parameter");
    }
    opt.frozen_prefixes = cfg.warm_start->freeze;
    lm_opt.frozen_prefixes = cfg.warm_start->freeze;
  }

  const bool joint = cfg.schedule == Schedule::Interleaved;
  EarlyStopper stopper(cfg.patience);
  nn::Parameters best = params.clone();
  std::size_t epoch = 0;
  while (epoch < cfg.epochs_max && !stopper.should_stop()) {
    ++epoch;
    EpochLog log;
    log.epoch = epoch;
    log.phase = joint ? "joint" : "acoustic";
    const auto order = epoch_order(cfg.seed, epoch, train_utts.size());
    std::size_t skipped = 0;
    log.train_ctc = acoustic_epoch(cfg, params, opt, train_utts, order, epoch, skipped, hooks);
    if (joint) log.train_lm = lm_epoch(cfg, params, lm_opt, train_utts, order);
    log.skipped = skipped;
    result.skipped += skipped;
    const auto v = validate_split(params, val_utts);
    log.val_ctc = v.ctc;
    log.val_lm = v.lm;
    log.val_per = v.per;
    if (cfg.monitor_train_per) log.train_per = greedy_per(params, train_utts);
    log.improved = stopper.update(v.per);
    if (log.improved) best = params.clone();
    result.log.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);
  }
  result.epochs_run = epoch;
  result.early_stopped = stopper.should_stop();
  result.best_epoch = stopper.best_epoch();
  assign(params, best, "acoustic.");
  if (joint) assign(params, best, "lm.");

  if (!joint) {
    // LM loop on its own clock, monitored by validation cross-entropy.
    EarlyStopper lm_stopper(cfg.patience);
    nn::Parameters lm_best = params.clone();
    std::size_t lm_epoch_index = 0;
    while (lm_epoch_index < cfg.epochs_max && !lm_stopper.should_stop()) {
      ++lm_epoch_index;
      EpochLog log;
      log.epoch = lm_epoch_index;
      log.phase = "lm";
      const auto order = epoch_order(cfg.seed, cfg.epochs_max + lm_epoch_index, train_utts.size());
      log.train_lm = lm_epoch(cfg, params, lm_opt, train_utts, order);
      log.val_lm = lm_cross_entropy(params, val_utts);
      log.val_per = stopper.best_value();
      log.improved = lm_stopper.update(log.val_lm);
      if (log.improved) lm_best = params.clone();
      result.log.push_back(log);
      if (hooks.on_epoch) hooks.on_epoch(log);
    }
    assign(params, lm_best, "lm.");
    best = params.clone();
  }
  result.best_hash = checkpoint::parameters_hash(best);

  auto& ckpt = result.checkpoint;
  ckpt.config = cfg.to_json();
  ckpt.inventory = inv.to_text();
  ckpt.lexicon = lex.to_text(inv);
  ckpt.vocab = vocab.tokens();
  ckpt.granularity = lm::granularity_name(cfg.lm_granularity);
  ckpt.epoch = static_cast<int>(result.best_epoch);
  ckpt.best_val_per = stopper.best_value();
  ckpt.params = params.clone();
  result.restored_hash = checkpoint::parameters_hash(ckpt.params);
  return result;
}

// ---- inference --------------------------------------------------------------

Model Model::from_checkpoint(const checkpoint::Checkpoint& ckpt) {
  Model m;
  m.inventory = phonetics::PhoneInventory::parse(ckpt.inventory);
  m.lexicon = lexicon::Lexicon::parse(ckpt.lexicon, m.inventory);
  m.vocab = lm::TokenVocab::from_tokens(ckpt.vocab, lm::parse_granularity(ckpt.granularity));
  m.params = ckpt.params.clone();
  if (acoustic::output_classes(m.params) != m.inventory.size() + 1) {
    throw DataError("checkpoint acoustic output does not match its phone inventory");
  }
  if (lm::lm_vocab_size(m.params) != m.vocab.size()) throw DataError("checkpoint LM does not match its vocab");
  if (ckpt.config.contains("decode")) {
    const auto& d = ckpt.config["decode"];
    m.decode.lm_weight = d.value("lm_weight", m.decode.lm_weight);
    m.decode.word_bonus = d.value("word_bonus", m.decode.word_bonus);
    m.decode.beam = d.value("beam", m.decode.beam);
  }
  return m;
}

phonetics::PhoneSeq reference_phones(const std::vector<std::string>& words, const lexicon::Lexicon& lex,
                                     const phonetics::PhoneInventory& inv) {
  phonetics::PhoneSeq out;
  for (const auto& w : words) {
    if (auto id = lex.find(w)) {
      const auto& p = lex.pronunciation(*id);
      out.insert(out.end(), p.begin(), p.end());
    } else {
      const auto p = phonetics::g2p(w, inv);
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  return out;
}

Hypothesis decode_audio(const Model& model, const dsp::AudioBuffer& audio, const decoder::DecodeOptions& opts) {
  const auto grid = acoustic::acoustic_forward(model.params, dsp::featurize(audio));
  Hypothesis h;
  if (opts.lm_weight == 0.0) {
    decoder::NullScorer null;
    h.transcript = decoder::beam_decode(grid, model.lexicon, null, opts);
  } else {
    decoder::NeuralLmScorer scorer(model.params, model.vocab, model.lexicon);
    h.transcript = decoder::beam_decode(grid, model.lexicon, scorer, opts);
  }
  h.words = h.transcript.text(model.lexicon);
  for (auto id : h.transcript.words) {
    const auto& p = model.lexicon.pronunciation(id);
    h.phones.insert(h.phones.end(), p.begin(), p.end());
  }
  h.greedy_phones = acoustic::ctc_greedy_decode(grid);
  for (auto id : decoder::greedy_lexicon_decode(h.greedy_phones, model.lexicon)) {
    h.greedy_words.push_back(model.lexicon.word(id));
  }
  return h;
}

metrics::MetricsReport evaluate(const Model& model, const manifest::Manifest& split,
                                const decoder::DecodeOptions& opts, const std::function<void(const std::string&)>& warn) {
  if (split.empty()) throw DataError("evaluation split is empty");
  metrics::WordPairs words, greedy_words;
  metrics::PhonePairs phones, greedy_phones;
  std::size_t skipped = 0;
  for (const auto& r : split.records) {
    try {
      const auto ref = transcript_words(r.text);
      if (ref.empty()) throw DataError("empty transcript");
      const auto ref_phones = reference_phones(ref, model.lexicon, model.inventory);
      const auto h = decode_audio(model, dsp::load_wav(r.audio), opts);
      words.push_back({ref, h.words});
      phones.push_back({ref_phones, h.phones});
      greedy_words.push_back({ref, h.greedy_words});
      greedy_phones.push_back({ref_phones, h.greedy_phones});
    } catch (const DataError& e) {
      ++skipped;
      if (warn) warn("skipping " + r.id + ": " + e.what());
    }
  }
  if (words.empty()) throw DataError("every evaluation utterance failed");
  auto rep = metrics::report(words, phones);
  rep.greedy_wer = metrics::wer(greedy_words);
  rep.greedy_per = metrics::per(greedy_phones);
  rep.skipped = skipped;
  return rep;
}

}  // namespace asr::pipeline
