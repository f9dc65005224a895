#include "asr/lm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "asr/error.hpp"
#include "asr/nn/init.hpp"
#include "asr/nn/ops.hpp"

namespace asr::lm {
namespace {

const std::vector<std::string> kSpecialTokens{"<s>", "</s>", "<wb>", "<unk>"};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMat = Eigen::Map<const RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;

ConstMat mat(const nn::Tensor& t) {
  return ConstMat(t.values().data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}
ConstVec vec(const nn::Tensor& t) { return ConstVec(t.values().data(), static_cast<Eigen::Index>(t.size())); }
ConstVec vec(const std::vector<double>& v) { return ConstVec(v.data(), static_cast<Eigen::Index>(v.size())); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Mirrors nn::lstm_cell on plain vectors.
void lstm_step(const nn::Parameters& p, const std::string& layer, const Eigen::VectorXd& x, std::vector<double>& h,
               std::vector<double>& c) {
  const auto& w_ih = p.at(layer + ".w_ih");
  const std::size_t k = h.size();
  Eigen::VectorXd gates = mat(w_ih) * x + vec(p.at(layer + ".bias"));
  gates += mat(p.at(layer + ".w_hh")) * vec(h);
  for (std::size_t j = 0; j < k; ++j) {
    const double i = sigmoid(gates[static_cast<Eigen::Index>(j)]);
    const double f = sigmoid(gates[static_cast<Eigen::Index>(k + j)]);
    const double g = std::tanh(gates[static_cast<Eigen::Index>(2 * k + j)]);
    const double o = sigmoid(gates[static_cast<Eigen::Index>(3 * k + j)]);
    c[j] = f * c[j] + i * g;
    h[j] = o * std::tanh(c[j]);
  }
}

TokenId clamp_token(TokenId t, std::size_t vocab) {
  return t < 0 || static_cast<std::size_t>(t) >= vocab ? TokenVocab::kUnk : t;
}

}  // namespace

const char* granularity_name(Granularity g) { return g == Granularity::Phone ? "phone" : "word"; }

Granularity parse_granularity(const std::string& name) {
  if (name == "phone") return Granularity::Phone;
  if (name == "word") return Granularity::Word;
  throw UsageError("unknown LM granularity '" + name + "' (expected phone or word)");
}

TokenVocab TokenVocab::for_phones(const phonetics::PhoneInventory& inv) {
  std::vector<std::string> tokens = kSpecialTokens;
  for (const auto& ph : inv.phones()) tokens.push_back(ph.symbol);
  return from_tokens(tokens, Granularity::Phone);
}

TokenVocab TokenVocab::for_words(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  std::vector<std::string> tokens = kSpecialTokens;
  tokens.insert(tokens.end(), words.begin(), words.end());
  return from_tokens(tokens, Granularity::Word);
}

TokenVocab TokenVocab::from_tokens(const std::vector<std::string>& tokens, Granularity g) {
  if (tokens.size() < kSpecials || !std::equal(kSpecialTokens.begin(), kSpecialTokens.end(), tokens.begin())) {
    throw DataError("token vocab must start with <s> </s> <wb> <unk>");
  }
  std::set<std::string> seen;
  for (const auto& t : tokens) {
    if (t.empty()) throw DataError("token vocab contains an empty token");
    if (!seen.insert(t).second) throw DataError("token vocab repeats '" + t + "'");
  }
  TokenVocab v;
  v.tokens_ = tokens;
  v.granularity_ = g;
  return v;
}

TokenId TokenVocab::index_of(const std::string& token) const {
  auto it = std::find(tokens_.begin(), tokens_.end(), token);
  return it == tokens_.end() ? kUnk : static_cast<TokenId>(it - tokens_.begin());
}

TokenId TokenVocab::phone_token(phonetics::PhoneId p) const {
  if (granularity_ != Granularity::Phone) throw UsageError("phone_token on a word-level vocab");
  const auto id = static_cast<std::size_t>(p) + kSpecials;
  if (p < 0 || id >= tokens_.size()) throw DataError("phone index " + std::to_string(p) + " outside the LM vocab");
  return static_cast<TokenId>(id);
}

TokenSeq TokenVocab::encode(const std::vector<std::string>& words, const lexicon::Lexicon& lex) const {
  TokenSeq out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (granularity_ == Granularity::Word) {
      out.push_back(index_of(words[i]));
      continue;
    }
    if (i > 0) out.push_back(kWordBoundary);
    auto id = lex.find(words[i]);
    if (!id) {
      out.push_back(kUnk);
      continue;
    }
    for (auto p : lex.pronunciation(*id)) out.push_back(phone_token(p));
  }
  return out;
}

void LmConfig::validate() const {
  if (embed_dim == 0 || lstm1_units == 0 || lstm2_units == 0) throw UsageError("LM layer sizes must be positive");
  if (paper_faithful && (lstm1_units != 128 || lstm2_units != 64)) {
    throw UsageError("paper-faithful LM requires LSTM sizes 128 and 64");
  }
}

nn::Parameters build_lm(std::size_t vocab_size, const LmConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (vocab_size < 3) throw UsageError("LM vocab needs at least 3 tokens, got " + std::to_string(vocab_size));
  std::mt19937_64 rng(seed);
  const std::size_t e = cfg.embed_dim, k1 = cfg.lstm1_units, k2 = cfg.lstm2_units;
  auto lstm_bias = [](std::size_t k) {
    // Forget gate starts open.
    auto b = nn::Tensor::zeros({4 * k}, true);
    for (std::size_t j = k; j < 2 * k; ++j) b.mutable_values()[j] = 1.0;
    return b;
  };
  nn::Parameters p;
  p.add("lm.embedding", nn::uniform_leaf({vocab_size, e}, 0.05, rng));
  p.add("lm.lstm1.w_ih", nn::uniform_leaf({4 * k1, e}, nn::xavier_limit(e, 4 * k1), rng));
  p.add("lm.lstm1.w_hh", nn::uniform_leaf({4 * k1, k1}, nn::xavier_limit(k1, 4 * k1), rng));
  p.add("lm.lstm1.bias", lstm_bias(k1));
  p.add("lm.lstm2.w_ih", nn::uniform_leaf({4 * k2, k1}, nn::xavier_limit(k1, 4 * k2), rng));
  p.add("lm.lstm2.w_hh", nn::uniform_leaf({4 * k2, k2}, nn::xavier_limit(k2, 4 * k2), rng));
  p.add("lm.lstm2.bias", lstm_bias(k2));
  p.add("lm.output.weight", nn::uniform_leaf({vocab_size, k2}, nn::xavier_limit(k2, vocab_size), rng));
  p.add("lm.output.bias", nn::Tensor::zeros({vocab_size}, true));
  return p;
}

std::size_t lm_vocab_size(const nn::Parameters& params) { return params.at("lm.output.weight").dim(0); }

nn::Tensor lm_sequence_loss(const nn::Parameters& params, const TokenSeq& tokens) {
  const std::size_t vocab = lm_vocab_size(params);
  const std::size_t k1 = params.at("lm.lstm1.w_hh").dim(1), k2 = params.at("lm.lstm2.w_hh").dim(1);
  nn::LstmState s1{nn::Tensor::zeros({k1}), nn::Tensor::zeros({k1})};
  nn::LstmState s2{nn::Tensor::zeros({k2}), nn::Tensor::zeros({k2})};
  nn::Tensor total;
  TokenId input = TokenVocab::kBos;
  for (std::size_t t = 0; t <= tokens.size(); ++t) {
    const TokenId target = t < tokens.size() ? clamp_token(tokens[t], vocab) : TokenVocab::kEos;
    auto x = nn::embedding(params.at("lm.embedding"), static_cast<std::size_t>(input));
    s1 = nn::lstm_cell(x, s1, params.at("lm.lstm1.w_ih"), params.at("lm.lstm1.w_hh"), params.at("lm.lstm1.bias"));
    s2 = nn::lstm_cell(s1.h, s2, params.at("lm.lstm2.w_ih"), params.at("lm.lstm2.w_hh"), params.at("lm.lstm2.bias"));
    auto logits = nn::dense(s2.h, params.at("lm.output.weight"), params.at("lm.output.bias"));
    auto ce = nn::cross_entropy(logits, static_cast<std::size_t>(target));
    total = total.defined() ? nn::add(total, ce) : ce;
    input = target;
  }
  return total;
}

LmState lm_initial_state(const nn::Parameters& params) {
  LmState s;
  s.h1.assign(params.at("lm.lstm1.w_hh").dim(1), 0.0);
  s.c1 = s.h1;
  s.h2.assign(params.at("lm.lstm2.w_hh").dim(1), 0.0);
  s.c2 = s.h2;
  return lm_advance(params, s, TokenVocab::kBos);
}

LmState lm_advance(const nn::Parameters& params, const LmState& state, TokenId token) {
  const std::size_t vocab = lm_vocab_size(params);
  token = clamp_token(token, vocab);
  LmState s = state;
  const auto& table = params.at("lm.embedding");
  const std::size_t e = table.dim(1);
  Eigen::VectorXd x = ConstVec(table.values().data() + static_cast<std::size_t>(token) * e, static_cast<Eigen::Index>(e));
  lstm_step(params, "lm.lstm1", x, s.h1, s.c1);
  lstm_step(params, "lm.lstm2", vec(s.h1), s.h2, s.c2);
  Eigen::VectorXd logits = mat(params.at("lm.output.weight")) * vec(s.h2) + vec(params.at("lm.output.bias"));
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  s.log_probs.resize(vocab);
  for (std::size_t j = 0; j < vocab; ++j) s.log_probs[j] = logits[static_cast<Eigen::Index>(j)] - lse;
  return s;
}

double lm_score(const nn::Parameters& params, const TokenSeq& tokens) {
  const std::size_t vocab = lm_vocab_size(params);
  auto s = lm_initial_state(params);
  double total = 0.0;
  for (TokenId t : tokens) {
    t = clamp_token(t, vocab);
    total += s.log_probs[static_cast<std::size_t>(t)];
    s = lm_advance(params, s, t);
  }
  return total + s.log_probs[TokenVocab::kEos];
}

double perplexity(const nn::Parameters& params, const std::vector<TokenSeq>& corpus) {
  if (corpus.empty()) throw DataError("perplexity of an empty corpus");
  double log_prob = 0.0;
  std::size_t count = 0;
  for (const auto& s : corpus) {
    log_prob += lm_score(params, s);
    count += s.size() + 1;
  }
  return std::exp(-log_prob / static_cast<double>(count));
}

double lm_train_epoch(nn::Parameters& params, const std::vector<TokenSeq>& corpus, nn::OptimizerState& opt,
                      std::size_t batch_size) {
  if (corpus.empty()) throw DataError("LM training corpus is empty");
  if (batch_size == 0) throw UsageError("LM batch size must be positive");
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    const std::size_t end = std::min(corpus.size(), start + batch_size);
    for (std::size_t i = start; i < end; ++i) {
      const double n = static_cast<double>(corpus[i].size() + 1);
      auto loss = lm_sequence_loss(params, corpus[i]);
      total += loss.item();
      tokens += corpus[i].size() + 1;
      // Mean per-token loss, averaged over the batch.
      nn::backward(nn::scale(loss, 1.0 / (n * static_cast<double>(end - start))));
    }
    nn::optimizer_step(opt, params);
  }
  return total / static_cast<double>(tokens);
}

std::vector<double> lm_train(nn::Parameters& params, const std::vector<TokenSeq>& corpus, nn::OptimizerState& opt,
                             const LmTrainOptions& options) {
  if (corpus.empty()) throw DataError("LM training corpus is empty");
  std::vector<double> trace;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    trace.push_back(lm_train_epoch(params, corpus, opt, options.batch_size));
  }
  return trace;
}

}  // namespace asr::lm
