#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "asr/lexicon.hpp"
#include "asr/phonetics.hpp"
#include "doctest.h"

using namespace asr;
using namespace asr::phonetics;
using asr::lexicon::build_lexicon;
using asr::lexicon::Lexicon;

namespace {

// Every segmentation of `w` into inventory units, as unit-length sequences.
void all_segmentations(const std::string& w, std::size_t pos, const PhoneInventory& inv, std::vector<std::size_t>& cur,
                       std::vector<std::vector<std::size_t>>& out) {
  if (pos == w.size()) {
    out.push_back(cur);
    return;
  }
  for (std::size_t len = 1; pos + len <= w.size(); ++len) {
    if (inv.unit_map().count(w.substr(pos, len))) {
      cur.push_back(len);
      all_segmentations(w, pos + len, inv, cur, out);
      cur.pop_back();
    }
  }
}

std::string units_of(const PhoneSeq& seq, const PhoneInventory& inv) {
  std::string s;
  for (auto p : seq) s += inv.at(p).units.front();
  return s;
}

}  // namespace

TEST_CASE("default inventory") {
  const auto& inv = default_inventory();
  CHECK(inv.size() == 54);
  CHECK(inv.vowels().size() == 5);
  CHECK(inv.consonants().size() == 49);
  std::set<std::string> symbols;
  for (const auto& p : inv.phones()) symbols.insert(p.symbol);
  CHECK(symbols.size() == 54);
  CHECK(inv.longest_unit() == 3);
  for (const char* s : {"bh", "ch", "dz", "dzv", "mb", "mbw", "mh", "nd", "ng", "nh", "ny", "nz", "pf", "sh", "sv",
                        "ts", "tsv", "vh", "zh", "zv"}) {
    CHECK_NOTHROW(inv.index_of(s));
  }

  std::ifstream f(ASR_DATA_DIR "/shona_phones_v1.txt");
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(PhoneInventory::parse(ss.str()) == inv);
  CHECK(PhoneInventory::parse(inv.to_text()) == inv);
}

TEST_CASE("inventory rejects malformed data") {
  CHECK_THROWS_AS(PhoneInventory::parse("0 a a\n1 a e\n"), DataError);
  CHECK_THROWS_AS(PhoneInventory::parse("0 a a\n2 b b\n"), DataError);
  CHECK_THROWS_AS(PhoneInventory::parse("0 a a\n1 b a\n"), DataError);
  CHECK_THROWS_AS(PhoneInventory::parse("0 a\n"), DataError);
}

TEST_CASE("g2p examples") {
  const auto& inv = default_inventory();
  auto baba = g2p("baba", inv);
  CHECK(phones_to_string(baba, inv) == "b a b a");
  CHECK(phones_to_string(g2p("mhoro", inv), inv) == "mh o r o");
  CHECK(phones_to_string(g2p("mbwanana", inv), inv) == "mbw a n a n a");
  CHECK(phones_to_string(g2p("tsvaira", inv), inv) == "tsv a i r a");
  try {
    g2p("xyz", inv);
    FAIL("expected G2pError");
  } catch (const G2pError& e) {
    CHECK(e.position() == 0);
  }
  try {
    g2p("baxa", inv);
    FAIL("expected G2pError");
  } catch (const G2pError& e) {
    CHECK(e.position() == 2);
  }
  CHECK_THROWS_AS(g2p("Baba", inv), G2pError);
  CHECK_THROWS_AS(g2p("", inv), G2pError);
}

TEST_CASE("g2p equals the longest-first segmentation from exhaustive enumeration") {
  const auto& inv = default_inventory();
  std::mt19937_64 rng(99);
  const std::string letters = "abdeghimnorstuvwyz";
  std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1), len(1, 6);
  auto check_word = [&](const std::string& w) {
    std::vector<std::vector<std::size_t>> segs;
    std::vector<std::size_t> cur;
    all_segmentations(w, 0, inv, cur, segs);
    if (segs.empty()) {
      CHECK_THROWS_AS(g2p(w, inv), G2pError);
      return;
    }
    try {
      auto phones = g2p(w, inv);
      const auto best = *std::max_element(segs.begin(), segs.end());
      REQUIRE(phones.size() == best.size());
      for (std::size_t i = 0; i < best.size(); ++i) CHECK(inv.at(phones[i]).units.front().size() == best[i]);
      CHECK(units_of(phones, inv) == w);
    } catch (const G2pError&) {
      // Greedy may dead-end where a shorter first choice would have worked.
    }
  };
  for (int i = 0; i < 3000; ++i) {
    std::string w;
    for (std::size_t n = len(rng); n > 0; --n) w += letters[pick(rng)];
    check_word(w);
  }
  // CV words never dead-end.
  auto onsets = inv.consonants();
  auto vowels = inv.vowels();
  for (int i = 0; i < 2000; ++i) {
    std::string w;
    while (w.size() < 4) {
      w += inv.at(onsets[rng() % onsets.size()]).units.front();
      w += inv.at(vowels[rng() % vowels.size()]).units.front();
    }
    if (w.size() > 6) continue;
    CHECK_NOTHROW(g2p(w, inv));
    check_word(w);
  }
}

TEST_CASE("lexicon building") {
  const auto& inv = default_inventory();
  auto one = build_lexicon({"baba"}, inv);
  CHECK(one.lexicon.size() == 1);
  CHECK(one.lexicon.depth() == 4);
  CHECK(build_lexicon({"baba", "baba"}, inv).lexicon.size() == 1);
  CHECK_THROWS_AS(build_lexicon({"xyz", "qq"}, inv), DataError);

  auto mixed = build_lexicon({"mhoro", "xx", "baba", "ba", "amai"}, inv);
  CHECK(mixed.skipped == std::vector<std::string>{"xx"});
  const auto& lex = mixed.lexicon;
  CHECK(lex.words() == std::vector<std::string>{"amai", "ba", "baba", "mhoro"});

  // Walking the trie reconstructs exactly the word set.
  std::map<std::string, PhoneSeq> found;
  std::function<void(int, PhoneSeq&)> walk = [&](int node, PhoneSeq& path) {
    for (auto w : lex.trie()[node].words) found[lex.word(w)] = path;
    for (auto [p, child] : lex.trie()[node].children) {
      path.push_back(p);
      walk(child, path);
      path.pop_back();
    }
  };
  PhoneSeq path;
  walk(Lexicon::kRoot, path);
  CHECK(found.size() == lex.size());
  for (std::size_t i = 0; i < lex.size(); ++i) CHECK(found.at(lex.word(static_cast<int>(i))) == lex.pronunciation(static_cast<int>(i)));

  auto again = Lexicon::parse(lex.to_text(inv), inv);
  CHECK(again.words() == lex.words());
  CHECK(again.to_text(inv) == lex.to_text(inv));
  CHECK(lex.find("baba").has_value());
  CHECK_FALSE(lex.find("bab").has_value());
}
