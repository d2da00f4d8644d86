#pragma once

#include <span>
#include <vector>

#include "dqsa/env.hpp"

namespace dqsa {

// Each (slot, clique, channel) cell is exactly one of: idle, success (one transmitter),
// collision (two or more). Fractions are over all cells, so for K = 1 they sum to 1.
struct ChannelStats {
  long cells = 0;
  long idle = 0;
  long success = 0;
  long collision = 0;

  double throughput() const { return cells ? static_cast<double>(success) / static_cast<double>(cells) : 0.0; }
  double idle_fraction() const { return cells ? static_cast<double>(idle) / static_cast<double>(cells) : 0.0; }
  double collision_fraction() const {
    return cells ? static_cast<double>(collision) / static_cast<double>(cells) : 0.0;
  }

  ChannelStats& operator+=(const ChannelStats& o) {
    cells += o.cells;
    idle += o.idle;
    success += o.success;
    collision += o.collision;
    return *this;
  }
};

inline ChannelStats channel_stats(std::span<const SlotOutcome> log,
                                  const std::vector<std::vector<int>>& cliques, int num_channels) {
  ChannelStats st;
  std::vector<int> load(static_cast<std::size_t>(num_channels) + 1);
  for (const auto& out : log) {
    for (const auto& clique : cliques) {
      std::fill(load.begin(), load.end(), 0);
      for (int n : clique) ++load[static_cast<std::size_t>(out.actions[static_cast<std::size_t>(n)])];
      for (int k = 1; k <= num_channels; ++k) {
        ++st.cells;
        const int l = load[static_cast<std::size_t>(k)];
        if (l == 0) ++st.idle;
        else if (l == 1) ++st.success;
        else ++st.collision;
      }
    }
  }
  return st;
}

// Per-clique variant: result[c] covers clique c only.
inline std::vector<ChannelStats> channel_stats_per_clique(std::span<const SlotOutcome> log,
                                                          const std::vector<std::vector<int>>& cliques,
                                                          int num_channels) {
  std::vector<ChannelStats> per;
  per.reserve(cliques.size());
  for (const auto& clique : cliques) per.push_back(channel_stats(log, {clique}, num_channels));
  return per;
}

}  // namespace dqsa
