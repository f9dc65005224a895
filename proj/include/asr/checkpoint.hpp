#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "asr/dsp.hpp"
#include "asr/nn/tensor.hpp"
#include "json.hpp"

namespace asr::checkpoint {

inline constexpr char kMagic[] = "ASRCKPT1";
inline constexpr int kFormatVersion = 1;

struct NamedTensor {
  std::string name;
  nn::Shape shape;
  std::vector<double> values;  // stored as float32
};

// Container layout: magic, u64 header length, JSON header, float32 LE
// payloads in directory order, u32 CRC-32 of everything before it.
// `meta` keys are merged into the header next to "version" and "tensors".
void write_container(const std::filesystem::path& path, const nlohmann::ordered_json& meta,
                     const std::vector<NamedTensor>& tensors);

struct Container {
  nlohmann::ordered_json meta;  // header without "version"/"tensors"
  std::vector<NamedTensor> tensors;
};

// Checksum and truncation failures throw VerificationError; a foreign magic,
// version mismatch or malformed header throws DataError.
Container read_container(const std::filesystem::path& path);

struct Checkpoint {
  nlohmann::ordered_json config;  // training config snapshot
  std::string inventory;          // phone inventory file text
  std::string lexicon;            // lexicon file text
  std::vector<std::string> vocab;
  std::string granularity = "phone";
  int epoch = 0;                        // best epoch (1-based; 0 = untrained)
  std::optional<double> best_val_per;
  nn::Parameters params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Debug dump of a feature matrix as a single tensor named "features".
void save_features(const dsp::FeatureMatrix& f, const std::filesystem::path& path);
dsp::FeatureMatrix load_features(const std::filesystem::path& path);

// SHA-256 over names, shapes and float32 values, as lowercase hex.
std::string parameters_hash(const nn::Parameters& params);
std::string file_sha256(const std::filesystem::path& path);

}  // namespace asr::checkpoint
