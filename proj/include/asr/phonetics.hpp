#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "asr/error.hpp"

namespace asr::phonetics {

using PhoneId = int;
using PhoneSeq = std::vector<PhoneId>;

struct Phone {
  PhoneId index = 0;
  std::string symbol;
  std::vector<std::string> units;  // orthographic spellings
};

// Ordered phone set with a lookup from orthographic unit to phone.
class PhoneInventory {
 public:
  PhoneInventory() = default;
  explicit PhoneInventory(std::vector<Phone> phones);

  // `<index> <symbol> <unit,unit,...>` per line; '#' starts a comment.
  static PhoneInventory parse(std::string_view text);
  static PhoneInventory load(const std::string& path);
  std::string to_text() const;

  std::size_t size() const { return phones_.size(); }
  const Phone& at(PhoneId id) const { return phones_.at(static_cast<std::size_t>(id)); }
  const std::vector<Phone>& phones() const { return phones_; }
  const std::string& symbol(PhoneId id) const { return at(id).symbol; }
  PhoneId index_of(std::string_view symbol) const;  // throws DataError
  bool is_vowel(PhoneId id) const;
  std::vector<PhoneId> vowels() const;
  std::vector<PhoneId> consonants() const;

  const std::map<std::string, PhoneId, std::less<>>& unit_map() const { return units_; }
  std::size_t longest_unit() const { return longest_; }

  bool operator==(const PhoneInventory& other) const { return to_text() == other.to_text(); }

 private:
  std::vector<Phone> phones_;
  std::map<std::string, PhoneId, std::less<>> units_;
  std::map<std::string, PhoneId, std::less<>> symbols_;
  std::size_t longest_ = 0;
};

// The shipped 54-phone Shona inventory (data/shona_phones_v1.txt).
const PhoneInventory& default_inventory();

class G2pError : public DataError {
 public:
  G2pError(const std::string& word, std::size_t position)
      : DataError("cannot convert '" + word + "' at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Greedy longest-match segmentation of lowercase orthography into phones.
PhoneSeq g2p(std::string_view word, const PhoneInventory& inv);

std::string phones_to_string(const PhoneSeq& phones, const PhoneInventory& inv);

}  // namespace asr::phonetics
