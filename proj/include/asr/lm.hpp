#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asr/lexicon.hpp"
#include "asr/nn/optim.hpp"
#include "asr/nn/tensor.hpp"
#include "asr/phonetics.hpp"

namespace asr::lm {

using TokenId = int;
using TokenSeq = std::vector<TokenId>;

enum class Granularity { Phone, Word };

const char* granularity_name(Granularity g);
Granularity parse_granularity(const std::string& name);

// Dense token alphabet. The four specials always occupy indices 0..3:
// <s>, </s>, <wb>, <unk>; content tokens follow.
class TokenVocab {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kWordBoundary = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kSpecials = 4;

  TokenVocab() = default;
  // Phone-level: one token per inventory phone, in inventory order.
  static TokenVocab for_phones(const phonetics::PhoneInventory& inv);
  // Word-level: one token per distinct word, sorted.
  static TokenVocab for_words(std::vector<std::string> words);
  // Rebuilds a vocab from its serialized token list. Throws DataError.
  static TokenVocab from_tokens(const std::vector<std::string>& tokens, Granularity g);

  std::size_t size() const { return tokens_.size(); }
  Granularity granularity() const { return granularity_; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Unknown strings map to <unk>.
  TokenId index_of(const std::string& token) const;
  TokenId phone_token(phonetics::PhoneId p) const;

  // Token sequence for a sentence, without <s>/</s>. Phone-level sequences
  // are the pronunciations joined by <wb>.
  TokenSeq encode(const std::vector<std::string>& words, const lexicon::Lexicon& lex) const;

  bool operator==(const TokenVocab& other) const = default;

 private:
  std::vector<std::string> tokens_;
  Granularity granularity_ = Granularity::Phone;
};

struct LmConfig {
  std::size_t embed_dim = 64;
  std::size_t lstm1_units = 128;
  std::size_t lstm2_units = 64;
  bool paper_faithful = true;

  void validate() const;
};

// Embedding, LSTM(128), LSTM(64) and a softmax projection, under "lm.".
nn::Parameters build_lm(std::size_t vocab_size, const LmConfig& cfg, std::uint64_t seed);

std::size_t lm_vocab_size(const nn::Parameters& params);

// Summed next-token cross-entropy of <s> tokens </s> under teacher forcing.
nn::Tensor lm_sequence_loss(const nn::Parameters& params, const TokenSeq& tokens);

// Natural-log probability of <s> tokens </s>. Out-of-range ids count as <unk>.
double lm_score(const nn::Parameters& params, const TokenSeq& tokens);

// exp(-total log prob / total predicted tokens), </s> included.
double perplexity(const nn::Parameters& params, const std::vector<TokenSeq>& corpus);

struct LmTrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 1;  // sentences per optimizer step
};

// One pass over `corpus` in order; returns the mean per-token loss.
double lm_train_epoch(nn::Parameters& params, const std::vector<TokenSeq>& corpus, nn::OptimizerState& opt,
                      std::size_t batch_size = 1);
// Per-epoch mean per-token loss trace.
std::vector<double> lm_train(nn::Parameters& params, const std::vector<TokenSeq>& corpus, nn::OptimizerState& opt,
                             const LmTrainOptions& options);

// Incremental inference without building a graph.
struct LmState {
  std::vector<double> h1, c1, h2, c2;
  std::vector<double> log_probs;  // next-token distribution given the history
};

LmState lm_initial_state(const nn::Parameters& params);  // history = <s>
LmState lm_advance(const nn::Parameters& params, const LmState& state, TokenId token);

}  // namespace asr::lm
