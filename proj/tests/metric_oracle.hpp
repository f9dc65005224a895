#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace asr::testing {

// Exponential-time edit distance straight from the recursive definition.
template <typename T>
std::size_t brute_edit_distance(const std::vector<T>& a, std::size_t i, const std::vector<T>& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  if (a[i] == b[j]) return brute_edit_distance(a, i + 1, b, j + 1);
  return 1 + std::min({brute_edit_distance(a, i + 1, b, j + 1), brute_edit_distance(a, i + 1, b, j),
                       brute_edit_distance(a, i, b, j + 1)});
}

template <typename T>
std::size_t brute_edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  return brute_edit_distance(a, 0, b, 0);
}

}  // namespace asr::testing
