#pragma once

#include <algorithm>
#include <cstddef>
#include <string_view>
#include <vector>

#include "paramine/unicode.hpp"

namespace paramine::levenshtein {

// Unit-cost edit distance over Unicode scalar values.
inline std::size_t distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// Case-insensitive distance divided by the longer length (0 when both empty).
inline double distance_ratio_ci(std::string_view a, std::string_view b) {
  const auto ua = unicode::fold(unicode::decode(a));
  const auto ub = unicode::fold(unicode::decode(b));
  const auto longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(distance(ua, ub)) / static_cast<double>(longest);
}

// Number of replace operations in a minimum unit-cost edit script. Among
// equally short scripts the one with the most replaces is taken, which makes
// the count symmetric in its arguments.
inline std::size_t replace_count(std::u32string_view a, std::u32string_view b) {
  struct Cell {
    std::size_t cost;
    std::size_t replaces;
  };
  auto better = [](Cell x, Cell y) {
    return x.cost < y.cost || (x.cost == y.cost && x.replaces > y.replaces);
  };
  std::vector<Cell> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = {j, 0};
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = {i, 0};
    for (std::size_t j = 1; j <= b.size(); ++j) {
      Cell best = a[i - 1] == b[j - 1] ? Cell{prev[j - 1].cost, prev[j - 1].replaces}
                                       : Cell{prev[j - 1].cost + 1, prev[j - 1].replaces + 1};
      const Cell del{prev[j].cost + 1, prev[j].replaces};
      const Cell ins{cur[j - 1].cost + 1, cur[j - 1].replaces};
      if (better(del, best)) best = del;
      if (better(ins, best)) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[b.size()].replaces;
}

// 1 - replaces / max(len): insertions and deletions are free.
inline double replace_only_similarity(std::string_view a, std::string_view b) {
  const auto ua = unicode::decode(a);
  const auto ub = unicode::decode(b);
  const auto longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(replace_count(ua, ub)) / static_cast<double>(longest);
}

}  // namespace paramine::levenshtein
