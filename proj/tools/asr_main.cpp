#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "asr/checkpoint.hpp"
#include "asr/corpusgen.hpp"
#include "asr/dsp.hpp"
#include "asr/error.hpp"
#include "asr/gradsuite.hpp"
#include "asr/manifest.hpp"
#include "asr/pipeline.hpp"
#include "json.hpp"

namespace {

using namespace asr;

bool verbose = false;

void note(const std::string& msg) {
  if (verbose) std::cerr << msg << '\n';
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

struct Common {
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed (overrides the config seed where there is one)");
  cmd->add_flag("--verbose,-v", verbose, "Progress on stderr");
}

int run_features(const std::string& wav, const std::string& out) {
  const auto f = dsp::featurize(dsp::load_wav(wav));
  checkpoint::save_features(f, out);
  note("wrote " + std::to_string(f.rows) + " x " + std::to_string(f.cols) + " features to " + out);
  return 0;
}

int run_corpusgen(const std::string& config, const std::string& out_dir, const Common& c) {
  auto cfg = config.empty() ? corpusgen::GenConfig{} : corpusgen::GenConfig::from_json(read_json(config));
  if (c.seed) cfg.seed = *c.seed;
  const auto corpus = corpusgen::generate_corpus(cfg, out_dir);
  note("wrote " + std::to_string(corpus.manifest.size()) + " utterances to " + corpus.manifest_path.string());
  return 0;
}

int run_train(const std::string& config, const std::string& manifest_path, const std::string& out,
              const std::string& report, const Common& c) {
  auto cfg = pipeline::TrainConfig::from_json(read_json(config));
  if (c.seed) cfg.seed = *c.seed;
  const auto m = manifest::load_manifest(manifest_path);
  pipeline::TrainHooks hooks;
  hooks.warn = warn;
  hooks.on_epoch = [](const pipeline::EpochLog& e) {
    char line[256];
    std::snprintf(line, sizeof line, "%s epoch %zu: train_ctc %.4f train_lm %.4f val_ctc %.4f val_lm %.4f val_per %.4f%s",
                  e.phase.c_str(), e.epoch, e.train_ctc, e.train_lm, e.val_ctc, e.val_lm, e.val_per,
                  e.improved ? " *" : "");
    note(line);
  };
  const auto result = pipeline::train(cfg, m, hooks);
  checkpoint::save_checkpoint(result.checkpoint, out);
  if (checkpoint::parameters_hash(checkpoint::load_checkpoint(out).params) != result.best_hash) {
    throw VerificationError("saved checkpoint does not match the best-epoch snapshot");
  }
  if (!report.empty()) write_text(report, result.to_json().dump(2) + "\n");
  note("best epoch " + std::to_string(result.best_epoch) + " of " + std::to_string(result.epochs_run) +
       (result.early_stopped ? " (early stop)" : "") + "; checkpoint " + out);
  return 0;
}

decoder::DecodeOptions decode_options(const pipeline::Model& model, const std::optional<double>& lm_weight,
                                      const std::optional<std::size_t>& beam,
                                      const std::optional<double>& word_bonus) {
  auto opts = model.decode;
  if (lm_weight) opts.lm_weight = *lm_weight;
  if (beam) opts.beam = *beam;
  if (word_bonus) opts.word_bonus = *word_bonus;
  if (opts.beam == 0) throw UsageError("--beam must be at least 1");
  if (!(opts.lm_weight >= 0)) throw UsageError("--lm-weight must be >= 0");
  return opts;
}

int run_decode(const std::string& ckpt, const std::string& wav, const std::optional<double>& lm_weight, const std::optional<std::size_t>& beam,
               const std::optional<double>& word_bonus) {
  const auto model = pipeline::Model::from_checkpoint(checkpoint::load_checkpoint(ckpt));
  const auto opts = decode_options(model, lm_weight, beam, word_bonus);
  const auto h = pipeline::decode_audio(model, dsp::load_wav(wav), opts);
  std::string text;
  for (const auto& w : h.words) text += (text.empty() ? "" : " ") + w;
  std::cout << text << '\n';
  note("score " + std::to_string(h.transcript.score) + " (acoustic " + std::to_string(h.transcript.acoustic) +
       ", lm " + std::to_string(h.transcript.lm) + ")");
  note("greedy phones: " + phonetics::phones_to_string(h.greedy_phones, model.inventory));
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& manifest_path, const std::string& split,
             const std::string& report, const std::optional<double>& lm_weight,
             const std::optional<std::size_t>& beam, const std::optional<double>& word_bonus) {
  const auto ckpt = checkpoint::load_checkpoint(ckpt_path);
  const auto model = pipeline::Model::from_checkpoint(ckpt);
  const auto opts = decode_options(model, lm_weight, beam, word_bonus);
  const auto m = manifest::load_manifest(manifest_path);
  manifest::Manifest subset;
  if (split == "all") {
    subset = m;
  } else {
    // Recreate the training-time split from the checkpoint's config.
    const auto cfg = pipeline::TrainConfig::from_json(ckpt.config);
    const auto parts = manifest::split_corpus(m, cfg.split, cfg.seed);
    subset = split == "train" ? parts.train : split == "val" ? parts.val : parts.test;
  }
  const auto rep = pipeline::evaluate(model, subset, opts, warn);
  if (!report.empty()) write_text(report, rep.to_json() + "\n");
  std::cout << rep.to_table();
  return 0;
}

int run_gradcheck(std::size_t seeds, const Common& c) {
  gradsuite::SuiteOptions opts;
  opts.seeds = seeds;
  opts.base_seed = c.seed.value_or(0);
  bool ok = true;
  gradsuite::run_suite(opts, [&](const gradsuite::CaseResult& r) {
    char line[256];
    std::snprintf(line, sizeof line, "%-22s %s  worst %.3e  seeds %zu  retried %zu  %.1fs", r.name.c_str(),
                  r.passed ? "ok  " : "FAIL", r.worst_error, r.seeds, r.retried, r.seconds);
    std::cout << line << '\n';
    if (!r.passed) std::cout << "  worst scalar " << r.worst_scalar << " at seed " << r.worst_seed << '\n';
    ok = ok && r.passed;
  });
  if (!ok) throw VerificationError("gradient check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shona speech recognition toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string wav, out, config, out_dir, manifest_path, ckpt, report, split = "test";
  std::optional<double> lm_weight, word_bonus;
  std::optional<std::size_t> beam;
  std::size_t seeds = 50;

  auto* features = app.add_subcommand("features", "Dump the 39-dim feature matrix of a WAV file");
  features->add_option("wav", wav, "Input WAV")->required()->check(CLI::ExistingFile);
  features->add_option("--out", out, "Output feature file")->required();
  add_common(features, common);

  auto* gen = app.add_subcommand("corpusgen", "Generate a synthetic corpus");
  gen->add_option("--config", config, "Generator config JSON")->check(CLI::ExistingFile);
  gen->add_option("--out-dir", out_dir, "Output directory")->required();
  add_common(gen, common);

  auto* train = app.add_subcommand("train", "Train acoustic model and LM");
  train->add_option("--config", config, "Training config JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--manifest", manifest_path, "Corpus manifest (JSON Lines)")->required();
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--report", report, "Write the training log as JSON");
  add_common(train, common);

  auto* decode = app.add_subcommand("decode", "Transcribe one WAV file");
  decode->add_option("--ckpt", ckpt, "Checkpoint")->required();
  decode->add_option("--wav", wav, "Input WAV")->required();
  add_common(decode, common);

  auto* eval = app.add_subcommand("eval", "Score a manifest split");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--manifest", manifest_path, "Corpus manifest")->required();
  eval->add_option("--split", split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  eval->add_option("--report", report, "Write the metrics report as JSON");
  add_common(eval, common);

  for (auto* cmd : {decode, eval}) {
    cmd->add_option("--lm-weight", lm_weight, "LM weight lambda");
    cmd->add_option("--beam", beam, "Beam width");
    cmd->add_option("--word-bonus", word_bonus, "Per-word bonus beta");
  }

  auto* grad = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  grad->add_option("--seeds", seeds, "Random instances per case")->check(CLI::PositiveNumber);
  add_common(grad, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }

  try {
    if (*features) return run_features(wav, out);
    if (*gen) return run_corpusgen(config, out_dir, common);
    if (*train) return run_train(config, manifest_path, out, report, common);
    if (*decode) return run_decode(ckpt, wav, lm_weight, beam, word_bonus);
    if (*eval) return run_eval(ckpt, manifest_path, split, report, lm_weight, beam, word_bonus);
    if (*grad) return run_gradcheck(seeds, common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Numeric);
  }
  return static_cast<int>(ErrorKind::Usage);
}
