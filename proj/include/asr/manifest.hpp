#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace asr::manifest {

struct Record {
  std::string id;
  std::filesystem::path audio;  // resolved against the manifest directory
  std::string text;
  std::optional<double> duration_s;
};

struct Manifest {
  std::vector<Record> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// JSON Lines: {"id", "audio", "text", optional "duration_s"} per line. Blank
// lines are ignored. Errors name the offending line.
Manifest load_manifest(const std::filesystem::path& path);
// Audio paths are written relative to the manifest directory when possible.
void save_manifest(const Manifest& m, const std::filesystem::path& path);

struct Split {
  Manifest train, val, test;
};

using Ratios = std::array<double, 3>;

// Seeded shuffle, then val = floor(n * r_val), test = floor(n * r_test), and
// train takes the rest. Every split must end up non-empty.
Split split_corpus(const Manifest& m, const Ratios& ratios, std::uint64_t seed);

}  // namespace asr::manifest
