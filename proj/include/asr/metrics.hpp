#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "asr/error.hpp"

namespace asr::metrics {

enum class EditOp { Match, Substitution, Deletion, Insertion };

struct AlignedPair {
  EditOp op;
  std::ptrdiff_t ref_index;  // -1 for insertions
  std::ptrdiff_t hyp_index;  // -1 for deletions
};

struct Alignment {
  std::vector<AlignedPair> ops;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t matches = 0;

  std::size_t cost() const { return substitutions + deletions + insertions; }
};

// Unit-cost Levenshtein alignment. The backtrace prefers
// match > substitution > deletion > insertion.
template <typename T>
Alignment align(const std::vector<T>& ref, const std::vector<T>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }

  Alignment a;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const auto ii = static_cast<std::ptrdiff_t>(i) - 1, jj = static_cast<std::ptrdiff_t>(j) - 1;
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      a.ops.push_back({EditOp::Match, ii, jj});
      ++a.matches;
      --i, --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      a.ops.push_back({EditOp::Substitution, ii, jj});
      ++a.substitutions;
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      a.ops.push_back({EditOp::Deletion, ii, -1});
      ++a.deletions;
      --i;
    } else {
      a.ops.push_back({EditOp::Insertion, -1, jj});
      ++a.insertions;
      --j;
    }
  }
  std::reverse(a.ops.begin(), a.ops.end());
  return a;
}

template <typename T>
using Pairs = std::vector<std::pair<std::vector<T>, std::vector<T>>>;

struct ErrorCounts {
  std::size_t errors = 0;
  std::size_t ref_tokens = 0;
  std::size_t utterances_with_error = 0;
  std::size_t utterances = 0;
};

template <typename T>
ErrorCounts count_errors(const Pairs<T>& pairs) {
  ErrorCounts c;
  for (const auto& [ref, hyp] : pairs) {
    const auto cost = align(ref, hyp).cost();
    c.errors += cost;
    c.ref_tokens += ref.size();
    c.utterances_with_error += cost > 0 ? 1 : 0;
    ++c.utterances;
  }
  return c;
}

// Corpus-pooled error rate: total edits over total reference tokens.
template <typename T>
double error_rate(const Pairs<T>& pairs) {
  if (pairs.empty()) throw DataError("error rate of an empty corpus");
  const auto c = count_errors(pairs);
  if (c.ref_tokens == 0) throw DataError("error rate needs at least one reference token");
  return static_cast<double>(c.errors) / static_cast<double>(c.ref_tokens);
}

using WordPairs = Pairs<std::string>;
using PhonePairs = Pairs<int>;

inline double wer(const WordPairs& pairs) { return error_rate(pairs); }
inline double per(const PhonePairs& pairs) { return error_rate(pairs); }

// Fraction of utterances with at least one error.
template <typename T>
double ser(const Pairs<T>& pairs) {
  if (pairs.empty()) throw DataError("sentence error rate of an empty corpus");
  const auto c = count_errors(pairs);
  return static_cast<double>(c.utterances_with_error) / static_cast<double>(c.utterances);
}

struct MetricsReport {
  double wer = 0.0;
  double per = 0.0;
  double ser = 0.0;
  double word_accuracy = 0.0;      // max(0, 1 - wer)
  double sentence_accuracy = 0.0;  // 1 - ser
  std::size_t n_utts = 0;
  std::size_t n_ref_words = 0;
  std::size_t n_ref_phones = 0;
  // Greedy (no language model) decoding, filled in by evaluation.
  std::optional<double> greedy_wer;
  std::optional<double> greedy_per;
  std::size_t skipped = 0;

  std::string to_json() const;
  std::string to_table() const;
  static MetricsReport from_json(const std::string& text);
};

MetricsReport report(const WordPairs& word_pairs, const PhonePairs& phone_pairs);

// Lowercase, drop punctuation, collapse whitespace.
std::string normalize_text(const std::string& text);
std::vector<std::string> tokenize(const std::string& text);

}  // namespace asr::metrics
