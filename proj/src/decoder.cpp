#include "asr/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <tuple>
#include <utility>

#include "asr/error.hpp"

namespace asr::decoder {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// One prefix: completed words plus a position inside the word being spelled.
// The word ending at `node` is only committed when the next word starts or
// the utterance ends, so every key stands for exactly one phone prefix.
struct Hyp {
  double log_blank = kNegInf;      // alignments ending in blank
  double log_non_blank = kNegInf;  // alignments ending in the last phone
  double lm = 0.0;                 // LM log-prob of the completed words
  int last_phone = -1;

  double acoustic() const { return log_add(log_blank, log_non_blank); }
};

using Key = std::pair<WordSeq, int>;

// Score-descending, then lexicographic on (words, node).
bool better(double sa, const Key& a, double sb, const Key& b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

std::vector<double> log_grid(const acoustic::PosteriorGrid& grid) {
  std::vector<double> out(grid.probs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(grid.probs[i]);
  return out;
}

void check_inputs(const acoustic::PosteriorGrid& grid, const lexicon::Lexicon& lex) {
  if (grid.frames == 0 || grid.classes < 2 || grid.probs.size() != grid.frames * grid.classes) {
    throw UsageError("decode: malformed posterior grid");
  }
  if (lex.empty()) throw UsageError("decode: empty lexicon");
  for (const auto& node : lex.trie()) {
    for (const auto& [phone, child] : node.children) {
      if (phone >= grid.blank()) throw DataError("decode: lexicon phone outside the acoustic model's alphabet");
    }
  }
}

}  // namespace

double LmScorer::score(const WordSeq& words) {
  double total = 0.0;
  WordSeq history;
  for (WordId w : words) {
    total += extend(history, w);
    history.push_back(w);
  }
  return total + finish(history);
}

NeuralLmScorer::NeuralLmScorer(const nn::Parameters& params, const lm::TokenVocab& vocab, const lexicon::Lexicon& lex)
    : params_(params), vocab_(vocab), lex_(lex) {
  if (lm::lm_vocab_size(params) != vocab.size()) throw DataError("LM parameters do not match the token vocab");
}

const lm::LmState& NeuralLmScorer::state(const WordSeq& history) {
  if (auto it = cache_.find(history); it != cache_.end()) return it->second;
  if (history.empty()) return cache_.emplace(history, lm::lm_initial_state(params_)).first->second;
  WordSeq prefix(history.begin(), history.end() - 1);
  extend(prefix, history.back());
  return cache_.at(history);
}

double NeuralLmScorer::extend(const WordSeq& history, WordId word) {
  lm::LmState cur = state(history);
  double total = 0.0;
  auto feed = [&](lm::TokenId t) {
    total += cur.log_probs[static_cast<std::size_t>(t)];
    cur = lm::lm_advance(params_, cur, t);
  };
  if (vocab_.granularity() == lm::Granularity::Word) {
    feed(vocab_.index_of(lex_.word(word)));
  } else {
    if (!history.empty()) feed(lm::TokenVocab::kWordBoundary);
    for (auto p : lex_.pronunciation(word)) feed(vocab_.phone_token(p));
  }
  WordSeq next = history;
  next.push_back(word);
  cache_.emplace(std::move(next), std::move(cur));
  return total;
}

double NeuralLmScorer::finish(const WordSeq& history) { return state(history).log_probs[lm::TokenVocab::kEos]; }

std::vector<std::string> Transcript::text(const lexicon::Lexicon& lex) const {
  std::vector<std::string> out;
  for (auto w : words) out.push_back(lex.word(w));
  return out;
}

std::string Transcript::joined(const lexicon::Lexicon& lex) const {
  std::string out;
  for (auto w : words) {
    if (!out.empty()) out += ' ';
    out += lex.word(w);
  }
  return out;
}

Transcript beam_decode(const acoustic::PosteriorGrid& grid, const lexicon::Lexicon& lex, LmScorer& lm,
                       const DecodeOptions& opts) {
  check_inputs(grid, lex);
  if (opts.beam == 0) throw UsageError("decode: beam width must be at least 1");
  const auto logp = log_grid(grid);
  const std::size_t classes = grid.classes;
  const auto blank = static_cast<std::size_t>(grid.blank());
  const auto& trie = lex.trie();
  const auto words_allowed = [&](std::size_t n) { return opts.max_words == 0 || n <= opts.max_words; };
  const auto combined = [&](const Key& k, const Hyp& h) {
    return h.acoustic() + opts.lm_weight * h.lm + opts.word_bonus * static_cast<double>(k.first.size());
  };

  std::vector<std::pair<Key, Hyp>> beam;
  Hyp start;
  start.log_blank = 0.0;
  beam.emplace_back(Key{{}, lexicon::Lexicon::kRoot}, start);

  for (std::size_t t = 0; t < grid.frames; ++t) {
    const double* y = logp.data() + t * classes;
    std::map<Key, Hyp> next;
    auto emit = [&](const Key& key, double lm_value, int phone, double source) {
      auto& h = next[key];
      h.lm = lm_value;
      h.last_phone = phone;
      h.log_non_blank = log_add(h.log_non_blank, source + y[phone]);
    };
    for (const auto& [key, h] : beam) {
      const double total = h.acoustic();
      {
        auto& stay = next[key];
        stay.lm = h.lm;
        stay.last_phone = h.last_phone;
        stay.log_blank = log_add(stay.log_blank, total + y[blank]);
        if (h.last_phone >= 0) stay.log_non_blank = log_add(stay.log_non_blank, h.log_non_blank + y[h.last_phone]);
      }
      // A repeated phone only starts a new token after a blank.
      auto source_for = [&](int phone) { return phone == h.last_phone ? h.log_blank : total; };
      const auto& node = trie[static_cast<std::size_t>(key.second)];
      for (const auto& [phone, child] : node.children) {
        emit(Key{key.first, child}, h.lm, phone, source_for(phone));
      }
      if (node.words.empty() || !words_allowed(key.first.size() + 2)) continue;
      for (WordId w : node.words) {
        WordSeq done = key.first;
        const double lm_value = h.lm + lm.extend(key.first, w);
        done.push_back(w);
        for (const auto& [phone, child] : trie[lexicon::Lexicon::kRoot].children) {
          emit(Key{done, child}, lm_value, phone, source_for(phone));
        }
      }
    }

    std::vector<std::pair<double, std::map<Key, Hyp>::iterator>> ranked;
    ranked.reserve(next.size());
    for (auto it = next.begin(); it != next.end(); ++it) {
      if (it->second.acoustic() == kNegInf) continue;
      ranked.emplace_back(combined(it->first, it->second), it);
    }
    const std::size_t keep = std::min(opts.beam, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                      [](const auto& a, const auto& b) { return better(a.first, a.second->first, b.first, b.second->first); });
    beam.clear();
    for (std::size_t i = 0; i < keep; ++i) beam.emplace_back(ranked[i].second->first, ranked[i].second->second);
  }

  Transcript best;
  for (const auto& [key, h] : beam) {
    const auto& node = trie[static_cast<std::size_t>(key.second)];
    if (!words_allowed(key.first.size() + 1)) continue;
    for (WordId w : node.words) {
      WordSeq words = key.first;
      const double lm_total = h.lm + lm.extend(key.first, w);
      words.push_back(w);
      const double lm_value = lm_total + lm.finish(words);
      const double acoustic = h.acoustic();
      const double score = acoustic + opts.lm_weight * lm_value + opts.word_bonus * static_cast<double>(words.size());
      if (!best.found || score > best.score || (score == best.score && words < best.words)) {
        best = Transcript{std::move(words), true, score, acoustic, lm_value};
      }
    }
  }
  return best;
}

Transcript exhaustive_decode(const acoustic::PosteriorGrid& grid, const lexicon::Lexicon& lex, LmScorer& lm,
                             const DecodeOptions& opts) {
  check_inputs(grid, lex);
  if (lex.size() > 5) throw UsageError("exhaustive_decode: lexicon larger than 5 words");
  if (grid.frames > 8) throw UsageError("exhaustive_decode: more than 8 frames");
  if (opts.max_words < 1 || opts.max_words > 3) throw UsageError("exhaustive_decode: max_words must be 1..3");

  Transcript best;
  WordSeq words;
  auto visit = [&](auto&& self) -> void {
    if (!words.empty()) {
      phonetics::PhoneSeq phones;
      for (auto w : words) {
        const auto& pron = lex.pronunciation(w);
        phones.insert(phones.end(), pron.begin(), pron.end());
      }
      if (acoustic::ctc_min_frames(phones) <= grid.frames) {
        const double acoustic = -acoustic::ctc_loss(grid, phones);
        const double lm_value = lm.score(words);
        const double score =
            acoustic + opts.lm_weight * lm_value + opts.word_bonus * static_cast<double>(words.size());
        if (!best.found || score > best.score || (score == best.score && words < best.words)) {
          best = Transcript{words, true, score, acoustic, lm_value};
        }
      }
    }
    if (words.size() == opts.max_words) return;
    for (std::size_t w = 0; w < lex.size(); ++w) {
      words.push_back(static_cast<WordId>(w));
      self(self);
      words.pop_back();
    }
  };
  visit(visit);
  return best;
}

WordSeq greedy_lexicon_decode(const phonetics::PhoneSeq& phones, const lexicon::Lexicon& lex) {
  if (lex.empty()) throw UsageError("decode: empty lexicon");
  // Dijkstra over (phones consumed, trie node) with (edits, words) costs.
  using Cost = std::pair<std::size_t, std::size_t>;
  using State = std::pair<std::size_t, int>;
  struct Back {
    State prev;
    WordId word;  // -1 when the step emits nothing
  };
  std::map<State, Cost> dist;
  std::map<State, Back> back;
  std::priority_queue<std::tuple<Cost, State>, std::vector<std::tuple<Cost, State>>, std::greater<>> queue;
  const State start{0, lexicon::Lexicon::kRoot}, goal{phones.size(), lexicon::Lexicon::kRoot};
  dist[start] = {0, 0};
  queue.push({{0, 0}, start});
  auto relax = [&](const State& from, const Cost& c, const State& to, WordId word) {
    auto it = dist.find(to);
    if (it != dist.end() && it->second <= c) return;
    dist[to] = c;
    back[to] = {from, word};
    queue.push({c, to});
  };
  while (!queue.empty()) {
    const auto [cost, st] = queue.top();
    queue.pop();
    if (dist[st] < cost) continue;
    if (st == goal) break;
    const auto [i, node] = st;
    const auto& trie = lex.trie()[static_cast<std::size_t>(node)];
    if (i < phones.size()) relax(st, {cost.first + 1, cost.second}, {i + 1, node}, -1);
    for (const auto& [phone, child] : trie.children) {
      relax(st, {cost.first + 1, cost.second}, {i, child}, -1);
      if (i < phones.size()) relax(st, {cost.first + (phone == phones[i] ? 0 : 1), cost.second}, {i + 1, child}, -1);
    }
    if (node != lexicon::Lexicon::kRoot && !trie.words.empty()) {
      relax(st, {cost.first, cost.second + 1}, {i, lexicon::Lexicon::kRoot}, trie.words.front());
    }
  }
  WordSeq words;
  for (State st = goal; st != start;) {
    const auto& b = back.at(st);
    if (b.word >= 0) words.push_back(b.word);
    st = b.prev;
  }
  std::reverse(words.begin(), words.end());
  return words;
}

}  // namespace asr::decoder
