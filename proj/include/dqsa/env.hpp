#pragma once

// Slot-synchronous multichannel random-access medium with ACK-only feedback.
//
// Users are partitioned into disjoint cliques. Within a clique a transmission on channel k
// succeeds iff it is the only transmission on k in that slot; cliques never interfere.

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dqsa/error.hpp"

namespace dqsa {

// 0 = stay silent, k in 1..K = transmit on channel k.
using Action = int;

struct EnvConfig {
  int num_users = 1;
  int num_channels = 1;
  int horizon = 1;
  std::vector<double> capacities;          // size K; empty means all 1.0
  std::vector<std::vector<int>> cliques;   // empty means one clique holding every user
  std::uint64_t seed = 0;

  static EnvConfig single_clique(int users, int channels, int horizon, std::uint64_t seed = 0) {
    EnvConfig c;
    c.num_users = users;
    c.num_channels = channels;
    c.horizon = horizon;
    c.seed = seed;
    return c;
  }

  // Consecutive users grouped into cliques of the given sizes.
  static EnvConfig from_clique_sizes(std::span<const int> sizes, int channels, int horizon,
                                     std::uint64_t seed = 0) {
    EnvConfig c;
    c.num_channels = channels;
    c.horizon = horizon;
    c.seed = seed;
    int next = 0;
    for (int s : sizes) {
      std::vector<int> members(static_cast<std::size_t>(s));
      std::iota(members.begin(), members.end(), next);
      next += s;
      c.cliques.push_back(std::move(members));
    }
    c.num_users = next;
    return c;
  }

  std::vector<double> channel_capacities() const {
    return capacities.empty() ? std::vector<double>(static_cast<std::size_t>(num_channels), 1.0)
                              : capacities;
  }

  std::vector<std::vector<int>> clique_partition() const {
    if (!cliques.empty()) return cliques;
    std::vector<int> all(static_cast<std::size_t>(num_users));
    std::iota(all.begin(), all.end(), 0);
    return {all};
  }

  void validate() const {
    if (num_users < 1) throw ConfigError("env: num_users must be >= 1");
    if (num_channels < 1) throw ConfigError("env: num_channels must be >= 1");
    if (horizon < 1) throw ConfigError("env: horizon must be >= 1");
    if (!capacities.empty()) {
      if (static_cast<int>(capacities.size()) != num_channels)
        throw ConfigError("env: capacities must have one entry per channel");
      for (double c : capacities)
        if (!(c > 0.0)) throw ConfigError("env: capacities must be strictly positive");
    }
    std::vector<int> seen(static_cast<std::size_t>(num_users), 0);
    for (const auto& clique : clique_partition()) {
      if (clique.empty()) throw ConfigError("env: empty clique");
      for (int n : clique) {
        if (n < 0 || n >= num_users) throw ConfigError("env: clique member out of range");
        if (seen[static_cast<std::size_t>(n)]++) throw ConfigError("env: user in two cliques");
      }
    }
    for (int s : seen)
      if (s != 1) throw ConfigError("env: every user must belong to exactly one clique");
  }
};

struct SlotOutcome {
  int slot = 0;                    // 0-based index of the resolved slot
  std::vector<Action> actions;
  std::vector<std::uint8_t> success;
  std::vector<std::uint8_t> ack;
};

// ACK seen by user n after the slot.
inline int local_observation(const SlotOutcome& outcome, int n) {
  return outcome.ack.at(static_cast<std::size_t>(n));
}

// Resolves one slot: within each clique, a channel chosen by exactly one user succeeds.
inline SlotOutcome resolve_slot(std::span<const Action> actions,
                                const std::vector<std::vector<int>>& cliques, int num_channels,
                                int slot = 0) {
  SlotOutcome out;
  out.slot = slot;
  out.actions.assign(actions.begin(), actions.end());
  out.success.assign(actions.size(), 0);
  out.ack.assign(actions.size(), 0);
  std::vector<int> load(static_cast<std::size_t>(num_channels) + 1);
  for (const auto& clique : cliques) {
    std::fill(load.begin(), load.end(), 0);
    for (int n : clique) ++load[static_cast<std::size_t>(actions[static_cast<std::size_t>(n)])];
    for (int n : clique) {
      const Action a = actions[static_cast<std::size_t>(n)];
      if (a != 0 && load[static_cast<std::size_t>(a)] == 1) {
        out.success[static_cast<std::size_t>(n)] = 1;
        out.ack[static_cast<std::size_t>(n)] = 1;
      }
    }
  }
  return out;
}

class Environment {
 public:
  explicit Environment(EnvConfig config) : config_(std::move(config)) {
    config_.validate();
    partition_ = config_.clique_partition();
    clique_of_.assign(static_cast<std::size_t>(config_.num_users), 0);
    for (std::size_t c = 0; c < partition_.size(); ++c)
      for (int n : partition_[c]) clique_of_[static_cast<std::size_t>(n)] = static_cast<int>(c);
    reset();
  }

  void reset() {
    current_slot_ = 0;
    success_counts_.assign(static_cast<std::size_t>(config_.num_users), 0);
    log_.clear();
  }

  const SlotOutcome& step(std::span<const Action> actions) {
    if (current_slot_ >= config_.horizon)
      throw HorizonError("env: step past horizon T=" + std::to_string(config_.horizon));
    if (static_cast<int>(actions.size()) != config_.num_users)
      throw DomainError("env: expected one action per user");
    for (Action a : actions)
      if (a < 0 || a > config_.num_channels)
        throw DomainError("env: action " + std::to_string(a) + " outside {0..K}");
    log_.push_back(resolve_slot(actions, partition_, config_.num_channels, current_slot_));
    const auto& out = log_.back();
    for (std::size_t n = 0; n < out.success.size(); ++n) success_counts_[n] += out.success[n];
    ++current_slot_;
    return out;
  }

  const EnvConfig& config() const { return config_; }
  const std::vector<std::vector<int>>& cliques() const { return partition_; }
  int clique_of(int n) const { return clique_of_.at(static_cast<std::size_t>(n)); }
  int current_slot() const { return current_slot_; }
  bool done() const { return current_slot_ >= config_.horizon; }
  const std::vector<int>& success_counts() const { return success_counts_; }
  const std::vector<SlotOutcome>& outcome_log() const { return log_; }

 private:
  EnvConfig config_;
  std::vector<std::vector<int>> partition_;
  std::vector<int> clique_of_;
  int current_slot_ = 0;
  std::vector<int> success_counts_;
  std::vector<SlotOutcome> log_;
};

// Fresh environment at slot 0. Throws ConfigError on an invalid config.
inline Environment reset(EnvConfig config) { return Environment(std::move(config)); }

}  // namespace dqsa
