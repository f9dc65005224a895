#include "asr/checkpoint.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "asr/error.hpp"

namespace asr::checkpoint {
namespace {

static_assert(std::endian::native == std::endian::little, "payload encoding assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)]);
  return v;
}
std::uint32_t get_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)]);
  return v;
}

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  void update(const std::string& s) { update(s.data(), s.size() + 1); }  // include the terminator
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out.push_back(digits[md[i] >> 4]);
      out.push_back(digits[md[i] & 15]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

void write_container(const std::filesystem::path& path, const nlohmann::ordered_json& meta,
                     const std::vector<NamedTensor>& tensors) {
  nlohmann::ordered_json header;
  header["version"] = kFormatVersion;
  for (const auto& [key, value] : meta.items()) {
    if (key == "version" || key == "tensors") throw UsageError("container meta may not define '" + key + "'");
    header[key] = value;
  }
  auto dir = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    if (nn::shape_size(t.shape) != t.values.size()) throw UsageError("tensor '" + t.name + "' shape/value mismatch");
    dir.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += 4 * t.values.size();
  }
  header["tensors"] = dir;
  const std::string header_text = header.dump();

  std::string out(kMagic, 8);
  put_u64(out, header_text.size());
  out += header_text;
  out.reserve(out.size() + offset + 4);
  for (const auto& t : tensors) {
    for (double v : t.values) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      put_u32(out, bits);
    }
  }
  put_u32(out, crc_of(out.data(), out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  if (s.size() < 8 + 8 + 4) throw VerificationError(path.string() + ": truncated container");
  const std::uint32_t stored = get_u32(s, s.size() - 4);
  if (crc_of(s.data(), s.size() - 4) != stored) {
    throw VerificationError(path.string() + ": checksum mismatch (file corrupted or truncated)");
  }
  if (s.compare(0, 8, kMagic, 8) != 0) throw DataError(path.string() + ": not a checkpoint container");
  const std::uint64_t header_len = get_u64(s, 8);
  if (header_len > s.size() - 20) throw VerificationError(path.string() + ": truncated header");

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(s.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }
  if (!header.contains("version") || !header["version"].is_number_integer()) {
    throw DataError(path.string() + ": header has no format version");
  }
  if (header["version"].get<int>() != kFormatVersion) {
    throw DataError(path.string() + ": unsupported format version " + std::to_string(header["version"].get<int>()) +
                    " (expected " + std::to_string(kFormatVersion) + ")");
  }

  Container c;
  const std::size_t payload = 16 + header_len;
  const std::size_t payload_end = s.size() - 4;
  try {
    for (const auto& entry : header.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<nn::Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const std::size_t n = nn::shape_size(t.shape);
      if (payload + offset + 4 * n > payload_end) throw VerificationError(path.string() + ": truncated tensor " + t.name);
      t.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        t.values[i] = std::bit_cast<float>(get_u32(s, payload + offset + 4 * i));
      }
      c.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed tensor directory: " + e.what());
  }
  for (const auto& [key, value] : header.items()) {
    if (key != "version" && key != "tensors") c.meta[key] = value;
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::ordered_json meta;
  meta["kind"] = "asr-checkpoint";
  meta["config"] = ckpt.config;
  meta["inventory"] = ckpt.inventory;
  meta["lexicon"] = ckpt.lexicon;
  meta["vocab"] = ckpt.vocab;
  meta["granularity"] = ckpt.granularity;
  meta["epoch"] = ckpt.epoch;
  meta["best_val_per"] = ckpt.best_val_per ? nlohmann::ordered_json(*ckpt.best_val_per) : nlohmann::ordered_json();
  std::vector<NamedTensor> tensors;
  for (const auto& [name, t] : ckpt.params) {
    tensors.push_back({name, t.shape(), std::vector<double>(t.values().begin(), t.values().end())});
  }
  write_container(path, meta, tensors);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto c = read_container(path);
  if (c.meta.value("kind", "") != "asr-checkpoint") throw DataError(path.string() + ": not a model checkpoint");
  Checkpoint ckpt;
  try {
    ckpt.config = c.meta.at("config");
    ckpt.inventory = c.meta.at("inventory").get<std::string>();
    ckpt.lexicon = c.meta.at("lexicon").get<std::string>();
    ckpt.vocab = c.meta.at("vocab").get<std::vector<std::string>>();
    ckpt.granularity = c.meta.at("granularity").get<std::string>();
    ckpt.epoch = c.meta.at("epoch").get<int>();
    if (!c.meta.at("best_val_per").is_null()) ckpt.best_val_per = c.meta.at("best_val_per").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": incomplete checkpoint header: " + e.what());
  }
  for (auto& t : c.tensors) {
    ckpt.params.add(t.name, nn::Tensor::from(t.shape, std::move(t.values), true));
  }
  return ckpt;
}

void save_features(const dsp::FeatureMatrix& f, const std::filesystem::path& path) {
  nlohmann::ordered_json meta;
  meta["kind"] = "features";
  meta["feature_kind"] = f.kind == dsp::FeatureKind::Stacked39 ? "stacked39" : "mfcc13";
  meta["frame_len_ms"] = f.frame_len_ms;
  meta["hop_ms"] = f.hop_ms;
  write_container(path, meta, {{"features", {f.rows, f.cols}, f.values}});
}

dsp::FeatureMatrix load_features(const std::filesystem::path& path) {
  auto c = read_container(path);
  if (c.meta.value("kind", "") != "features" || c.tensors.size() != 1 || c.tensors[0].name != "features" ||
      c.tensors[0].shape.size() != 2) {
    throw DataError(path.string() + ": not a feature dump");
  }
  const auto& t = c.tensors[0];
  dsp::FeatureMatrix f(t.shape[0], t.shape[1],
                       c.meta.value("feature_kind", "") == "stacked39" ? dsp::FeatureKind::Stacked39
                                                                       : dsp::FeatureKind::Mfcc13);
  f.values = t.values;
  f.frame_len_ms = c.meta.value("frame_len_ms", 25.0);
  f.hop_ms = c.meta.value("hop_ms", 10.0);
  return f;
}

std::string parameters_hash(const nn::Parameters& params) {
  Sha256 h;
  for (const auto& [name, t] : params) {
    h.update(name);
    h.update(nn::shape_string(t.shape()));
    for (double v : t.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      h.update(&bits, sizeof bits);
    }
  }
  return h.hex();
}

std::string file_sha256(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  Sha256 h;
  h.update(s.data(), s.size());
  return h.hex();
}

}  // namespace asr::checkpoint
