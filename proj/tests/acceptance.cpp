// Acceptance run: one PASS/FAIL line per criterion.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "asr/acoustic.hpp"
#include "asr/checkpoint.hpp"
#include "asr/corpusgen.hpp"
#include "asr/decoder.hpp"
#include "asr/dsp.hpp"
#include "asr/error.hpp"
#include "asr/gradsuite.hpp"
#include "asr/lm.hpp"
#include "asr/manifest.hpp"
#include "asr/metrics.hpp"
#include "asr/nn/ops.hpp"
#include "asr/pipeline.hpp"
#include "ctc_oracle.hpp"
#include "dsp_oracle.hpp"
#include "metric_oracle.hpp"

namespace fs = std::filesystem;
using namespace asr;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "asr_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ASR_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  gradsuite::SuiteOptions opts;
  opts.seeds = 50;
  bool ok = true;
  double worst = 0.0;
  std::string worst_case, failed;
  for (const auto& r : gradsuite::run_suite(opts)) {
    ok = ok && r.passed && r.seeds >= 50;
    if (!r.passed) failed += " " + r.name;
    if (r.worst_error >= worst) {
      worst = r.worst_error;
      worst_case = r.name;
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 120.0;
  return {ok, fmt("%zu cases x 50 seeds, worst relative error %.2e (%s), %.1f s%s", gradsuite::case_names().size(), worst,
                  worst_case.c_str(), secs, failed.empty() ? "" : (" failed:" + failed).c_str())};
}

// ---- 2 ----------------------------------------------------------------------

Outcome ctc_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::size_t instances = 0, infeasible = 0;
  double worst = 0.0;
  bool ok = true;
  for (int alphabet = 1; alphabet <= 4; ++alphabet) {
    const std::size_t classes = static_cast<std::size_t>(alphabet) + 1;
    // Every target of length 1..3 over the alphabet.
    std::vector<std::vector<int>> targets;
    for (std::size_t len = 1; len <= 3; ++len) {
      std::vector<int> t(len, 0);
      while (true) {
        targets.push_back(t);
        std::size_t i = 0;
        while (i < len && ++t[i] == alphabet) t[i++] = 0;
        if (i == len) break;
      }
    }
    for (const auto& target : targets) {
      for (std::size_t frames = 1; frames <= 6; ++frames) {
        acoustic::PosteriorGrid g;
        g.frames = frames;
        g.classes = classes;
        for (std::size_t t = 0; t < frames; ++t) {
          std::vector<double> row(classes);
          double z = 0;
          for (auto& v : row) z += (v = u(rng));
          for (double v : row) g.probs.push_back(v / z);
        }
        ++instances;
        const double brute = testing::brute_ctc_probability(g.probs, frames, classes, target);
        if (brute == 0.0) {
          ++infeasible;
          try {
            acoustic::ctc_loss(g, target);
            ok = false;
          } catch (const DataError&) {
          }
          continue;
        }
        const double err = std::abs(-acoustic::ctc_loss(g, target) - std::log(brute));
        std::vector<double> logs(g.probs.size());
        for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(g.probs[i]);
        const auto tensor = nn::Tensor::from({frames, classes}, logs);
        const double err_t = std::abs(-acoustic::ctc_loss(tensor, target).item() - std::log(brute));
        worst = std::max({worst, err, err_t});
      }
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && worst < 1e-6 && secs < 60.0;
  return {ok, fmt("%zu instances (%zu infeasible, rejected), max |log p - oracle| %.2e, %.1f s", instances, infeasible, worst,
                  secs)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome decoder_oracle() {
  std::mt19937_64 rng(3);
  std::size_t agree = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> n_phones_d(2, 5), n_words_d(1, 5), len_d(1, 3);
    std::uniform_int_distribution<std::size_t> frames_d(1, 8);
    const int n_phones = n_phones_d(rng);
    const std::size_t n_words = static_cast<std::size_t>(n_words_d(rng));
    std::map<std::string, phonetics::PhoneSeq> entries;
    std::uniform_int_distribution<int> ph(0, n_phones - 1);
    while (entries.size() < n_words) {
      phonetics::PhoneSeq p(static_cast<std::size_t>(len_d(rng)));
      for (auto& x : p) x = ph(rng);
      entries.emplace("w" + std::to_string(entries.size()), p);
    }
    const lexicon::Lexicon lex(entries);

    acoustic::PosteriorGrid g;
    g.frames = frames_d(rng);
    g.classes = static_cast<std::size_t>(n_phones) + 1;
    std::uniform_real_distribution<double> u(0.02, 1.0);
    for (std::size_t t = 0; t < g.frames; ++t) {
      std::vector<double> row(g.classes);
      double z = 0;
      for (auto& v : row) z += (v = u(rng));
      for (double v : row) g.probs.push_back(v / z);
    }

    const auto vocab = lm::TokenVocab::for_words(lex.words());
    const auto params = lm::build_lm(vocab.size(), lm::LmConfig{8, 8, 8, false}, rng());
    decoder::NeuralLmScorer a(params, vocab, lex), b(params, vocab, lex);
    decoder::DecodeOptions opts;
    opts.lm_weight = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    opts.word_bonus = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    opts.max_words = 3;
    opts.beam = 1u << 20;
    const auto beam = decoder::beam_decode(g, lex, a, opts);
    const auto exact = decoder::exhaustive_decode(g, lex, b, opts);
    if (beam.found != exact.found) continue;
    if (!exact.found) {
      ++agree;
      continue;
    }
    const double err = std::abs(beam.score - exact.score);
    worst = std::max(worst, err);
    if (beam.words == exact.words && err < 1e-6) ++agree;
  }
  return {agree == 100, fmt("%zu/100 instances agree, max score difference %.2e", agree, worst)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> sym(0, 4);
  std::uniform_int_distribution<std::size_t> ref_len(1, 8), hyp_len(0, 8);
  const std::vector<std::string> words{"a", "b", "c", "d", "e"};
  std::size_t exact = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<int> ref(ref_len(rng)), hyp(hyp_len(rng));
    for (auto& x : ref) x = sym(rng);
    for (auto& x : hyp) x = sym(rng);
    std::vector<std::string> wref, whyp;
    for (int x : ref) wref.push_back(words[static_cast<std::size_t>(x)]);
    for (int x : hyp) whyp.push_back(words[static_cast<std::size_t>(x)]);
    const auto oracle = testing::brute_edit_distance(ref, hyp);
    const auto al = metrics::align(ref, hyp);
    const double expected = static_cast<double>(oracle) / static_cast<double>(ref.size());
    const bool ok = al.cost() == oracle && metrics::align(wref, whyp).cost() == oracle &&
                    al.matches + al.substitutions + al.deletions == ref.size() &&
                    al.matches + al.substitutions + al.insertions == hyp.size() &&
                    metrics::per({{ref, hyp}}) == expected && metrics::wer({{wref, whyp}}) == expected;
    exact += ok;
  }
  // Identical corpora, then fuzzed sentence error rates.
  metrics::WordPairs same;
  for (int i = 0; i < 20; ++i) {
    std::vector<std::string> s(ref_len(rng));
    for (auto& w : s) w = words[static_cast<std::size_t>(sym(rng))];
    same.push_back({s, s});
  }
  const bool zero = metrics::wer(same) == 0.0;
  bool ser_ok = true;
  for (int i = 0; i < 500; ++i) {
    metrics::PhonePairs pairs(1 + rng() % 10);
    for (auto& [r, h] : pairs) {
      r.resize(hyp_len(rng));
      h.resize(hyp_len(rng));
      for (auto& x : r) x = sym(rng);
      for (auto& x : h) x = sym(rng);
    }
    const double s = metrics::ser(pairs);
    ser_ok = ser_ok && s >= 0.0 && s <= 1.0;
  }
  return {exact == 200 && zero && ser_ok,
          fmt("%zu/200 pairs exact, wer(identical) %s, ser in [0,1] on 500 fuzzed corpora: %s", exact,
              zero ? "= 0" : "!= 0", ser_ok ? "yes" : "no")};
}

// ---- 5 ----------------------------------------------------------------------

Outcome mfcc_oracle() {
  std::mt19937_64 rng(5);
  dsp::MelConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    dsp::AudioBuffer a;
    a.samples.resize(400 + rng() % 2400);
    std::normal_distribution<double> n(0.0, 0.1);
    const double f = std::uniform_real_distribution<double>(100.0, 7000.0)(rng);
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
      a.samples[k] = 0.3 * std::sin(2 * std::numbers::pi * f * static_cast<double>(k) / 16000.0) + n(rng);
    }
    const auto fast = dsp::compute_mel_energies(a, cfg);
    worst = std::max(worst, testing::rms_difference(fast.values, testing::oracle_mel_energies(a, cfg)));
  }
  std::size_t counts_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = rng() % 48000;
    const std::size_t expected = n < 400 ? 0 : (n - 400) / 160 + 1;
    bool ok = dsp::frame_count(n, 400, 160) == expected;
    if (n >= 400 && i % 50 == 0) {
      dsp::AudioBuffer a;
      a.samples.assign(n, 0.01);
      ok = ok && dsp::compute_mel_energies(a, cfg).rows == expected;
    }
    counts_ok += ok;
  }
  return {worst < 1e-4 && counts_ok == 1000,
          fmt("filterbank RMS vs naive DFT oracle %.2e over 20 signals, frame count exact for %zu/1000 lengths", worst,
              counts_ok)};
}

// ---- 6 ----------------------------------------------------------------------

const fs::path& overfit_corpus() {
  static const fs::path manifest = [] {
    corpusgen::GenConfig g;
    g.seed = 7;
    g.n_utterances = 20;
    g.vocab_size = 10;
    return corpusgen::generate_corpus(g, work_dir() / "overfit").manifest_path;
  }();
  return manifest;
}

pipeline::TrainConfig overfit_config() {
  pipeline::TrainConfig c;
  c.seed = 1;
  c.epochs_max = 150;
  c.augment.enabled = false;
  c.monitor_train_per = true;
  return c;
}

Outcome overfit() {
  const auto t0 = Clock::now();
  const auto m = manifest::load_manifest(overfit_corpus());
  const auto r = pipeline::train(overfit_config(), m);
  std::size_t first = 0;
  double best = 1.0;
  for (const auto& e : r.log) {
    best = std::min(best, *e.train_per);
    if (!first && *e.train_per < 0.05) first = e.epoch;
  }
  const auto model = pipeline::Model::from_checkpoint(r.checkpoint);
  const auto rep = pipeline::evaluate(model, r.split.train, model.decode);
  const double secs = seconds_since(t0);
  const bool ok = first > 0 && first <= 150 && secs < 600.0;
  return {ok, fmt("training-split PER < 5%% first at epoch %zu (best %.4f); restored model on its %zu training "
                  "utterances: PER %.4f, WER %.4f; %.0f s",
                  first, best, r.split.train.size(), rep.per, rep.wer, secs)};
}

// ---- 7 ----------------------------------------------------------------------

Outcome end_to_end() {
  const auto t0 = Clock::now();
  corpusgen::GenConfig g;
  g.seed = 3;
  g.n_utterances = 300;
  g.vocab_size = 50;
  g.snr_db = -6.0;
  const auto corpus = corpusgen::generate_corpus(g, work_dir() / "e2e");

  pipeline::TrainConfig c;
  c.seed = 1;
  c.epochs_max = 40;
  c.patience = 5;
  c.batch_size = 4;
  c.augment.enabled = false;
  const auto r = pipeline::train(c, corpus.manifest);
  const auto ckpt_path = work_dir() / "e2e.ckpt";
  checkpoint::save_checkpoint(r.checkpoint, ckpt_path);
  const auto restored = checkpoint::load_checkpoint(ckpt_path);
  const auto restored_hash = checkpoint::parameters_hash(restored.params);

  const auto model = pipeline::Model::from_checkpoint(restored);
  const auto rep = pipeline::evaluate(model, r.split.test, model.decode);
  const bool stop_ok = (r.early_stopped && r.epochs_run < c.epochs_max) || r.best_epoch == r.epochs_run;
  const bool ok = rep.wer < *rep.greedy_wer && rep.wer < 0.5 && stop_ok && restored_hash == r.best_hash;
  return {ok, fmt("test WER %.4f vs greedy no-LM WER %.4f (%zu utts, %zu words); PER %.4f; stopped at epoch %zu of "
                  "max %zu, best %zu; restored hash %s best-epoch hash; %.0f s",
                  rep.wer, *rep.greedy_wer, rep.n_utts, rep.n_ref_words, rep.per, r.epochs_run, c.epochs_max,
                  r.best_epoch, restored_hash == r.best_hash ? "==" : "!=", seconds_since(t0))};
}

// ---- 8 ----------------------------------------------------------------------

Outcome determinism() {
  const auto dir = work_dir() / "determinism";
  fs::create_directories(dir);
  auto cfg = overfit_config().to_json();
  cfg["epochs_max"] = 12;
  cfg["monitor_train_per"] = false;
  std::ofstream(dir / "train.json") << cfg.dump(2);
  const auto manifest = overfit_corpus().string();
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const auto base = (dir / run).string();
    ok = ok && run_cli("train --config " + (dir / "train.json").string() + " --manifest " + manifest + " --out " + base +
                       ".ckpt --report " + base + ".train.json --seed 4") == 0;
    ok = ok && run_cli("eval --ckpt " + base + ".ckpt --manifest " + manifest + " --split test --report " + base +
                       ".eval.json") == 0;
  }
  if (!ok) return {false, "asr train/eval exited with an error"};
  const bool ckpt_same = slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt");
  const bool train_same = slurp(dir / "a.train.json") == slurp(dir / "b.train.json");
  const bool eval_same = slurp(dir / "a.eval.json") == slurp(dir / "b.eval.json");
  return {ckpt_same && train_same && eval_same,
          fmt("two `asr train` + `asr eval` runs: checkpoints %s (sha256 %.16s...), training reports %s, metric reports %s",
              ckpt_same ? "identical" : "DIFFER", checkpoint::file_sha256(dir / "a.ckpt").c_str(),
              train_same ? "identical" : "DIFFER", eval_same ? "identical" : "DIFFER")};
}

// ---- 9 ----------------------------------------------------------------------

Outcome persistence() {
  const auto dir = work_dir() / "determinism";
  const auto src = dir / "a.ckpt";
  if (!fs::exists(src)) return {false, "no trained checkpoint from criterion 8"};
  const auto ckpt = checkpoint::load_checkpoint(src);
  const auto copy = work_dir() / "copy.ckpt";
  checkpoint::save_checkpoint(ckpt, copy);
  const auto back = checkpoint::load_checkpoint(copy);
  const bool bit_exact = nn::bit_equal(ckpt.params, back.params) && slurp(copy) == slurp(src) &&
                         back.config == ckpt.config && back.vocab == ckpt.vocab && back.lexicon == ckpt.lexicon;

  const auto bytes = slurp(src);
  const auto wav = manifest::load_manifest(overfit_corpus()).records.front().audio.string();
  const auto bad = work_dir() / "corrupt.ckpt";
  std::size_t detected = 0, trials = 0;
  bool clean_ok = run_cli("decode --ckpt " + src.string() + " --wav " + wav) == 0;
  for (std::size_t k = 0; k < 24; ++k) {
    const std::size_t at = k == 23 ? bytes.size() - 1 : k * (bytes.size() / 23);
    auto s = bytes;
    s[at] = static_cast<char>(s[at] ^ (1 << (k % 8)));
    std::ofstream(bad, std::ios::binary | std::ios::trunc).write(s.data(), static_cast<std::streamsize>(s.size()));
    ++trials;
    detected += run_cli("decode --ckpt " + bad.string() + " --wav " + wav) == 3;
  }
  return {bit_exact && clean_ok && detected == trials,
          fmt("round trip %s (%zu tensors, %zu bytes); %zu/%zu single-byte corruptions exit with code 3",
              bit_exact ? "bit-exact" : "NOT bit-exact", ckpt.params.size(), bytes.size(), detected, trials)};
}

// ---- 10 ---------------------------------------------------------------------

Outcome lm_properties() {
  const auto vocab = lm::TokenVocab::for_phones(phonetics::default_inventory());
  auto uniform = lm::build_lm(vocab.size(), lm::LmConfig{}, 1);
  for (const char* n : {"lm.output.weight", "lm.output.bias"}) {
    for (auto& v : uniform.at(n).mutable_values()) v = 0.0;
  }
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<lm::TokenId> tok(2, static_cast<lm::TokenId>(vocab.size()) - 1);
  std::uniform_int_distribution<std::size_t> len(0, 20);
  auto sentence = [&] {
    lm::TokenSeq s(len(rng));
    for (auto& t : s) t = tok(rng);
    return s;
  };
  std::vector<lm::TokenSeq> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back(sentence());
  const double ppl = lm::perplexity(uniform, corpus);

  bool scores_ok = true;
  double max_score = -1e300;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = lm::build_lm(vocab.size(), lm::LmConfig{}, seed);
    for (int i = 0; i < 200; ++i) {
      const double s = lm::lm_score(p, sentence());
      max_score = std::max(max_score, s);
      scores_ok = scores_ok && s <= 0.0;
    }
  }

  auto p = lm::build_lm(vocab.size(), lm::LmConfig{}, 3);
  lm::TokenSeq target;
  while (target.size() < 12) target = sentence();
  nn::OptimizerState opt({nn::OptimizerKind::Adam, 1e-2});
  lm::lm_train(p, {target}, opt, {200, 1});
  const double per_token = lm::lm_sequence_loss(p, target).item() / static_cast<double>(target.size() + 1);

  const bool ok = std::abs(ppl - static_cast<double>(vocab.size())) < 1e-3 && scores_ok && per_token < 0.1;
  return {ok, fmt("uniform perplexity %.6f (|vocab| %zu); max of 1000 sequence scores %.3f; single-sentence overfit "
                  "per-token loss %.4f after 200 epochs",
                  ppl, vocab.size(), max_score, per_token)};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradient_suite}, {2, ctc_oracle},   {3, decoder_oracle}, {4, metric_oracle},
      {5, mfcc_oracle},    {6, overfit},      {7, end_to_end},     {8, determinism},
      {9, persistence},    {10, lm_properties},
  };
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
