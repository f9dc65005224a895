#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asr/phonetics.hpp"

namespace asr::lexicon {

using phonetics::PhoneId;
using phonetics::PhoneSeq;
using WordId = int;

// Word -> pronunciation map with a prefix trie over phone sequences.
// Word ids follow lexicographic order of the spelling.
class Lexicon {
 public:
  struct TrieNode {
    std::map<PhoneId, int> children;
    std::vector<WordId> words;  // words whose pronunciation ends here
  };

  Lexicon() = default;
  explicit Lexicon(const std::map<std::string, PhoneSeq>& entries);

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::string& word(WordId id) const { return words_.at(static_cast<std::size_t>(id)); }
  const PhoneSeq& pronunciation(WordId id) const { return prons_.at(static_cast<std::size_t>(id)); }
  std::optional<WordId> find(const std::string& word) const;
  const std::vector<std::string>& words() const { return words_; }

  const std::vector<TrieNode>& trie() const { return trie_; }
  static constexpr int kRoot = 0;
  std::size_t depth() const;

  // `<word> <phone symbols space-separated>` per line.
  std::string to_text(const phonetics::PhoneInventory& inv) const;
  static Lexicon parse(const std::string& text, const phonetics::PhoneInventory& inv);
  static Lexicon load(const std::string& path, const phonetics::PhoneInventory& inv);
  void save(const std::string& path, const phonetics::PhoneInventory& inv) const;

 private:
  std::vector<std::string> words_;
  std::vector<PhoneSeq> prons_;
  std::vector<TrieNode> trie_;
};

struct LexiconBuild {
  Lexicon lexicon;
  std::vector<std::string> skipped;  // words rejected by g2p
};

// g2p over a word list; duplicates collapse, failures are reported and skipped.
// Throws DataError if nothing survives.
LexiconBuild build_lexicon(const std::vector<std::string>& words, const phonetics::PhoneInventory& inv);

}  // namespace asr::lexicon
