// Brute-force metric oracles shared by the unit and acceptance tests.
// Plain loops over every note, no shared helpers with the library.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "xmusic/score.hpp"

namespace xmusic::testing {

inline double naive_pce(const Score& s) {
  double total = 0;
  double h = 0;
  for (int pc = 0; pc < 12; ++pc) {
    double c = 0;
    for (const auto& t : s.tracks)
      if (t.instrument != InstrumentClass::Drum)
        for (const auto& n : t.notes) c += n.pitch % 12 == pc;
    total += c;
  }
  for (int pc = 0; pc < 12; ++pc) {
    double c = 0;
    for (const auto& t : s.tracks)
      if (t.instrument != InstrumentClass::Drum)
        for (const auto& n : t.notes) c += n.pitch % 12 == pc;
    if (c > 0) h -= c / total * std::log2(c / total);
  }
  return h;
}

inline double naive_gs(const Score& s) {
  const long tps = s.ticks_per_quarter / 8;
  long max_bar = 0;
  for (const auto& t : s.tracks)
    for (const auto& n : t.notes) max_bar = std::max(max_bar, static_cast<long>(n.onset / tps / 32));
  std::vector<std::array<int, 32>> grid(static_cast<std::size_t>(max_bar + 1));
  std::vector<bool> used(grid.size(), false);
  for (const auto& t : s.tracks)
    for (const auto& n : t.notes) {
      const long step = n.onset / tps;
      grid[static_cast<std::size_t>(step / 32)][static_cast<std::size_t>(step % 32)] = 1;
      used[static_cast<std::size_t>(step / 32)] = true;
    }
  double sum = 0;
  int pairs = 0;
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = a + 1; b < grid.size(); ++b) {
      if (!used[a] || !used[b]) continue;
      int diff = 0;
      for (int k = 0; k < 32; ++k) diff += grid[a][static_cast<std::size_t>(k)] != grid[b][static_cast<std::size_t>(k)];
      sum += 1.0 - diff / 32.0;
      ++pairs;
    }
  return sum / pairs;
}

inline double naive_ebr(const Score& s) {
  long end = 0;
  for (const auto& t : s.tracks)
    for (const auto& n : t.notes) end = std::max(end, static_cast<long>(n.offset));
  const long tpq = s.ticks_per_quarter;
  const long beats = (end + tpq - 1) / tpq;
  int empty = 0;
  for (long b = 0; b < beats; ++b) {
    bool any = false;
    for (const auto& t : s.tracks)
      for (const auto& n : t.notes) any = any || (n.onset >= b * tpq && n.onset < (b + 1) * tpq);
    empty += !any;
  }
  return static_cast<double>(empty) / beats;
}


}  // namespace xmusic::testing
