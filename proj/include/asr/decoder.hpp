#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "asr/acoustic.hpp"
#include "asr/lexicon.hpp"
#include "asr/lm.hpp"
#include "asr/nn/tensor.hpp"

namespace asr::decoder {

using lexicon::WordId;
using WordSeq = std::vector<WordId>;

// log P(W) as a sum of per-word increments plus an end-of-sentence term.
class LmScorer {
 public:
  virtual ~LmScorer() = default;
  // log P(word | history), including any boundary tokens in between.
  virtual double extend(const WordSeq& history, WordId word) = 0;
  // log P(</s> | history).
  virtual double finish(const WordSeq& history) = 0;

  double score(const WordSeq& words);
};

// P(W) = 1 for every W; decoding reduces to argmax P(X|W) (+ word bonus).
class NullScorer : public LmScorer {
 public:
  double extend(const WordSeq&, WordId) override { return 0.0; }
  double finish(const WordSeq&) override { return 0.0; }
};

// Adapter from the LSTM LM. Phone-level vocabularies see the word's phones,
// preceded by <wb> unless it is the first word. States are cached per history.
class NeuralLmScorer : public LmScorer {
 public:
  NeuralLmScorer(const nn::Parameters& params, const lm::TokenVocab& vocab, const lexicon::Lexicon& lex);
  double extend(const WordSeq& history, WordId word) override;
  double finish(const WordSeq& history) override;

 private:
  const lm::LmState& state(const WordSeq& history);

  const nn::Parameters& params_;
  const lm::TokenVocab& vocab_;
  const lexicon::Lexicon& lex_;
  std::map<WordSeq, lm::LmState> cache_;
};

struct DecodeOptions {
  double lm_weight = 1.0;    // lambda
  double word_bonus = 0.0;   // beta, added per word
  std::size_t beam = 16;
  std::size_t max_words = 0;  // 0 = unlimited
};

struct Transcript {
  WordSeq words;
  bool found = false;
  // acoustic + lambda * lm + beta * |words|; -inf when nothing was found.
  double score = -std::numeric_limits<double>::infinity();
  double acoustic = -std::numeric_limits<double>::infinity();  // log P(X|W)
  double lm = 0.0;                                              // log P(W)

  std::vector<std::string> text(const lexicon::Lexicon& lex) const;
  std::string joined(const lexicon::Lexicon& lex) const;
};

// CTC prefix beam search over the lexicon trie, combining
// log P(X|W) + lambda log P(W) + beta |W|. Ties go to the lexicographically
// smaller word-id sequence.
Transcript beam_decode(const acoustic::PosteriorGrid& grid, const lexicon::Lexicon& lex, LmScorer& lm,
                       const DecodeOptions& opts = {});

// Scores every word sequence of 1..max_words words with the exact CTC forward
// probability. Guard rails: lexicon <= 5 words, T' <= 8, 1 <= max_words <= 3.
Transcript exhaustive_decode(const acoustic::PosteriorGrid& grid, const lexicon::Lexicon& lex, LmScorer& lm,
                             const DecodeOptions& opts);

// Greedy no-LM baseline: the word sequence whose concatenated pronunciation
// is closest in phone edit distance to `phones` (fewest words on ties).
WordSeq greedy_lexicon_decode(const phonetics::PhoneSeq& phones, const lexicon::Lexicon& lex);

}  // namespace asr::decoder
