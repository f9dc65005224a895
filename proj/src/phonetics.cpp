#include "asr/phonetics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "inventory_data.hpp"

namespace asr::phonetics {
namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool is_vowel_unit(const std::string& s) { return s.size() == 1 && std::string_view("aeiou").find(s[0]) != std::string_view::npos; }

}  // namespace

PhoneInventory::PhoneInventory(std::vector<Phone> phones) : phones_(std::move(phones)) {
  for (std::size_t i = 0; i < phones_.size(); ++i) {
    const auto& p = phones_[i];
    if (p.index != static_cast<PhoneId>(i)) throw DataError("phone indices must be dense from 0");
    if (p.units.empty()) throw DataError("phone '" + p.symbol + "' has no orthographic unit");
    if (!symbols_.emplace(p.symbol, p.index).second) throw DataError("duplicate phone symbol: " + p.symbol);
    for (const auto& u : p.units) {
      if (!units_.emplace(u, p.index).second) throw DataError("orthographic unit mapped twice: " + u);
      longest_ = std::max(longest_, u.size());
    }
  }
}

PhoneInventory PhoneInventory::parse(std::string_view text) {
  std::vector<Phone> phones;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    Phone p;
    std::string units;
    if (!(ls >> p.index)) continue;
    if (!(ls >> p.symbol >> units)) throw DataError("inventory line " + std::to_string(line_no) + " is malformed");
    p.units = split_commas(units);
    phones.push_back(std::move(p));
  }
  return PhoneInventory(std::move(phones));
}

PhoneInventory PhoneInventory::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open phone inventory: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string PhoneInventory::to_text() const {
  std::ostringstream os;
  for (const auto& p : phones_) {
    os << p.index << ' ' << p.symbol << ' ';
    for (std::size_t i = 0; i < p.units.size(); ++i) os << (i ? "," : "") << p.units[i];
    os << '\n';
  }
  return os.str();
}

PhoneId PhoneInventory::index_of(std::string_view symbol) const {
  auto it = symbols_.find(symbol);
  if (it == symbols_.end()) throw DataError("unknown phone symbol: " + std::string(symbol));
  return it->second;
}

bool PhoneInventory::is_vowel(PhoneId id) const {
  const auto& units = at(id).units;
  return std::any_of(units.begin(), units.end(), is_vowel_unit);
}

std::vector<PhoneId> PhoneInventory::vowels() const {
  std::vector<PhoneId> out;
  for (const auto& p : phones_)
    if (is_vowel(p.index)) out.push_back(p.index);
  return out;
}

std::vector<PhoneId> PhoneInventory::consonants() const {
  std::vector<PhoneId> out;
  for (const auto& p : phones_)
    if (!is_vowel(p.index)) out.push_back(p.index);
  return out;
}

const PhoneInventory& default_inventory() {
  static const PhoneInventory inv = PhoneInventory::parse(kDefaultInventoryText);
  return inv;
}

PhoneSeq g2p(std::string_view word, const PhoneInventory& inv) {
  const std::string w(word);
  if (w.empty()) throw G2pError(w, 0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 'a' || w[i] > 'z') throw G2pError(w, i);
  }
  PhoneSeq out;
  std::size_t pos = 0;
  while (pos < w.size()) {
    bool matched = false;
    for (std::size_t len = std::min(inv.longest_unit(), w.size() - pos); len > 0; --len) {
      auto it = inv.unit_map().find(std::string_view(w).substr(pos, len));
      if (it != inv.unit_map().end()) {
        out.push_back(it->second);
        pos += len;
        matched = true;
        break;
      }
    }
    if (!matched) throw G2pError(w, pos);
  }
  return out;
}

std::string phones_to_string(const PhoneSeq& phones, const PhoneInventory& inv) {
  std::string out;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    if (i) out += ' ';
    out += inv.symbol(phones[i]);
  }
  return out;
}

}  // namespace asr::phonetics
