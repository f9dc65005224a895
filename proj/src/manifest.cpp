#include "asr/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "asr/dsp.hpp"
#include "asr/error.hpp"
#include "json.hpp"

namespace asr::manifest {

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  Manifest m;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(where + "expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key != "id" && key != "audio" && key != "text" && key != "duration_s") {
        throw DataError(where + "unknown field '" + key + "'");
      }
    }
    Record r;
    try {
      r.id = j.at("id").get<std::string>();
      r.audio = j.at("audio").get<std::string>();
      r.text = j.at("text").get<std::string>();
      if (j.contains("duration_s") && !j["duration_s"].is_null()) r.duration_s = j["duration_s"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + "missing or mistyped field (" + e.what() + ")");
    }
    if (r.id.empty()) throw DataError(where + "empty id");
    if (r.text.find_first_not_of(" \t") == std::string::npos) throw DataError(where + "empty text");
    if (r.duration_s && !(*r.duration_s > 0.0)) throw DataError(where + "duration_s must be positive");
    if (!ids.insert(r.id).second) throw DataError(where + "duplicate id '" + r.id + "'");
    if (r.audio.is_relative()) r.audio = base / r.audio;
    if (!std::filesystem::exists(r.audio)) throw DataError(where + "audio file not found: " + r.audio.string());
    if (!r.duration_s) r.duration_s = dsp::load_wav(r.audio).duration_s();
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& r : m.records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    auto rel = r.audio.lexically_relative(base.empty() ? "." : base);
    j["audio"] = (rel.empty() || *rel.begin() == "..") ? r.audio.generic_string() : rel.generic_string();
    j["text"] = r.text;
    if (r.duration_s) j["duration_s"] = *r.duration_s;
    out << j.dump() << '\n';
  }
}

Split split_corpus(const Manifest& m, const Ratios& ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw UsageError("split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
  const std::size_t n = m.size();
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[1] + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[2] + 1e-9));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
    throw DataError("corpus of " + std::to_string(n) + " utterances is too small for the split ratios");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = m.records[order[i]];
    if (i < n_val) s.val.records.push_back(r);
    else if (i < n_val + n_test) s.test.records.push_back(r);
    else s.train.records.push_back(r);
  }
  return s;
}

}  // namespace asr::manifest
