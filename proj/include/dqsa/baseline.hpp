#pragma once

// Slotted Aloha: every user transmits independently with probability p in each slot.

#include <cmath>
#include <vector>

#include "dqsa/env.hpp"
#include "dqsa/error.hpp"
#include "dqsa/random.hpp"

namespace dqsa {

enum class ChannelRule { Single, Uniform };

struct AlohaPolicy {
  double attempt_prob = 1.0;
  ChannelRule channel_rule = ChannelRule::Single;

  void validate() const {
    if (!(attempt_prob >= 0.0 && attempt_prob <= 1.0))
      throw ConfigError("aloha: attempt probability must lie in [0,1]");
  }
};

inline double optimal_attempt_prob(int clique_size) {
  if (clique_size < 1) throw DomainError("optimal_attempt_prob: clique size must be >= 1");
  return 1.0 / clique_size;
}

// Expected fraction of slots with exactly one transmitter: n p (1-p)^(n-1).
inline double aloha_throughput_analytic(int n, double p) {
  if (n < 1) throw DomainError("aloha_throughput_analytic: n must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("aloha_throughput_analytic: p must lie in [0,1]");
  return n * p * std::pow(1.0 - p, n - 1);
}

// Mean analytic throughput over cliques when clique j uses p_j = 1/n_j.
inline double aloha_benchmark(const std::vector<int>& clique_sizes) {
  if (clique_sizes.empty()) return 0.0;
  double total = 0.0;
  for (int n : clique_sizes) total += aloha_throughput_analytic(n, optimal_attempt_prob(n));
  return total / static_cast<double>(clique_sizes.size());
}

inline Action aloha_act(const AlohaPolicy& policy, int num_channels, Rng& rng) {
  if (uniform01(rng) >= policy.attempt_prob) return 0;
  if (policy.channel_rule == ChannelRule::Single || num_channels == 1) return 1;
  return uniform_int(rng, 1, num_channels);
}

}  // namespace dqsa
