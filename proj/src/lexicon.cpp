#include "asr/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace asr::lexicon {

Lexicon::Lexicon(const std::map<std::string, PhoneSeq>& entries) {
  trie_.emplace_back();
  for (const auto& [w, pron] : entries) {
    if (pron.empty()) throw DataError("empty pronunciation for '" + w + "'");
    const auto id = static_cast<WordId>(words_.size());
    words_.push_back(w);
    prons_.push_back(pron);
    int node = kRoot;
    for (PhoneId p : pron) {
      auto it = trie_[static_cast<std::size_t>(node)].children.find(p);
      if (it == trie_[static_cast<std::size_t>(node)].children.end()) {
        const int next = static_cast<int>(trie_.size());
        trie_[static_cast<std::size_t>(node)].children.emplace(p, next);
        trie_.emplace_back();
        node = next;
      } else {
        node = it->second;
      }
    }
    trie_[static_cast<std::size_t>(node)].words.push_back(id);
  }
}

std::optional<WordId> Lexicon::find(const std::string& word) const {
  auto it = std::lower_bound(words_.begin(), words_.end(), word);
  if (it == words_.end() || *it != word) return std::nullopt;
  return static_cast<WordId>(it - words_.begin());
}

std::size_t Lexicon::depth() const {
  std::size_t d = 0;
  for (const auto& p : prons_) d = std::max(d, p.size());
  return d;
}

std::string Lexicon::to_text(const phonetics::PhoneInventory& inv) const {
  std::ostringstream os;
  for (std::size_t i = 0; i < words_.size(); ++i) os << words_[i] << ' ' << phonetics::phones_to_string(prons_[i], inv) << '\n';
  return os.str();
}

Lexicon Lexicon::parse(const std::string& text, const phonetics::PhoneInventory& inv) {
  std::map<std::string, PhoneSeq> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string word, sym;
    if (!(ls >> word)) continue;
    PhoneSeq pron;
    while (ls >> sym) pron.push_back(inv.index_of(sym));
    if (pron.empty()) throw DataError("lexicon line " + std::to_string(line_no) + ": no pronunciation");
    entries[word] = std::move(pron);
  }
  return Lexicon(entries);
}

Lexicon Lexicon::load(const std::string& path, const phonetics::PhoneInventory& inv) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), inv);
}

void Lexicon::save(const std::string& path, const phonetics::PhoneInventory& inv) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write lexicon: " + path);
  out << to_text(inv);
}

LexiconBuild build_lexicon(const std::vector<std::string>& words, const phonetics::PhoneInventory& inv) {
  std::map<std::string, PhoneSeq> entries;
  LexiconBuild result;
  for (const auto& w : words) {
    if (entries.count(w)) continue;
    try {
      entries.emplace(w, phonetics::g2p(w, inv));
    } catch (const phonetics::G2pError&) {
      if (std::find(result.skipped.begin(), result.skipped.end(), w) == result.skipped.end()) result.skipped.push_back(w);
    }
  }
  if (entries.empty()) throw DataError("lexicon is empty: every word failed grapheme-to-phoneme conversion");
  result.lexicon = Lexicon(entries);
  return result;
}

}  // namespace asr::lexicon
