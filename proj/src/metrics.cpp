#include "asr/metrics.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace asr::metrics {

MetricsReport report(const WordPairs& word_pairs, const PhonePairs& phone_pairs) {
  if (word_pairs.size() != phone_pairs.size()) {
    throw DataError("report: " + std::to_string(word_pairs.size()) + " word pairs but " +
                    std::to_string(phone_pairs.size()) + " phone pairs");
  }
  MetricsReport r;
  r.wer = wer(word_pairs);
  r.per = per(phone_pairs);
  r.ser = ser(word_pairs);
  r.word_accuracy = std::max(0.0, 1.0 - r.wer);
  r.sentence_accuracy = 1.0 - r.ser;
  r.n_utts = word_pairs.size();
  for (const auto& [ref, _] : word_pairs) r.n_ref_words += ref.size();
  for (const auto& [ref, _] : phone_pairs) r.n_ref_phones += ref.size();
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["wer"] = wer;
  j["per"] = per;
  j["ser"] = ser;
  j["word_accuracy"] = word_accuracy;
  j["sentence_accuracy"] = sentence_accuracy;
  j["n_utts"] = n_utts;
  j["n_ref_words"] = n_ref_words;
  j["n_ref_phones"] = n_ref_phones;
  if (greedy_wer || greedy_per) {
    auto& a = j["ablation"];
    if (greedy_wer) a["greedy_wer"] = *greedy_wer;
    if (greedy_per) a["greedy_per"] = *greedy_per;
  }
  if (skipped) j["skipped"] = skipped;
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.wer = j.at("wer");
  r.per = j.at("per");
  r.ser = j.at("ser");
  r.word_accuracy = j.at("word_accuracy");
  r.sentence_accuracy = j.at("sentence_accuracy");
  r.n_utts = j.at("n_utts");
  r.n_ref_words = j.at("n_ref_words");
  r.n_ref_phones = j.at("n_ref_phones");
  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    if (a.contains("greedy_wer")) r.greedy_wer = a["greedy_wer"].get<double>();
    if (a.contains("greedy_per")) r.greedy_per = a["greedy_per"].get<double>();
  }
  if (j.contains("skipped")) r.skipped = j["skipped"];
  return r;
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  char line[96];
  auto row = [&](const char* name, double v) {
    std::snprintf(line, sizeof line, "%-22s %10.4f\n", name, v);
    os << line;
  };
  auto count = [&](const char* name, std::size_t v) {
    std::snprintf(line, sizeof line, "%-22s %10zu\n", name, v);
    os << line;
  };
  row("WER", wer);
  row("PER", per);
  row("SER", ser);
  row("word accuracy", word_accuracy);
  row("sentence accuracy", sentence_accuracy);
  if (greedy_wer) row("greedy WER (no LM)", *greedy_wer);
  if (greedy_per) row("greedy PER (no LM)", *greedy_per);
  count("utterances", n_utts);
  count("reference words", n_ref_words);
  count("reference phones", n_ref_phones);
  if (skipped) count("skipped utterances", skipped);
  return os.str();
}

std::string normalize_text(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
    } else if (std::ispunct(ch)) {
      continue;
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(normalize_text(text));
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace asr::metrics
