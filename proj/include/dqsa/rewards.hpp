#pragma once

// Reward functions over environment traces.
//
// Slot indices are 0-based: the outcome of slot s is credited at the start of slot s+1,
// so a reward trace entry s holds r(s+1) and is discounted by gamma^s.

#include <cmath>
#include <span>
#include <variant>
#include <vector>

#include "dqsa/env.hpp"
#include "dqsa/error.hpp"

namespace dqsa {

struct Competitive {};

struct AlphaFair {
  double alpha = 0.0;
};

struct RewardSpec {
  std::variant<Competitive, AlphaFair> kind = Competitive{};
  double gamma = 1.0;
  double log_floor = 1e-2;

  bool cooperative() const { return std::holds_alternative<AlphaFair>(kind); }
  double alpha() const { return cooperative() ? std::get<AlphaFair>(kind).alpha : 0.0; }

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("reward: gamma must lie in [0,1]");
    if (!(log_floor > 0.0)) throw ConfigError("reward: log_floor must be > 0");
    if (cooperative() && !(alpha() >= 0.0)) throw ConfigError("reward: alpha must be >= 0");
  }
};

inline double competitive_reward(const SlotOutcome& previous_slot, int n) {
  return previous_slot.success.at(static_cast<std::size_t>(n)) ? 1.0 : 0.0;
}

// x^(1-alpha)/(1-alpha), with log(x) at alpha == 1. For alpha >= 1 the argument is floored
// at log_floor so a starved user costs a large but finite penalty.
inline double alpha_fair_utility(double x, double alpha, double log_floor = 1e-2) {
  if (!(x >= 0.0)) throw DomainError("alpha_fair_utility: x must be >= 0");
  if (alpha < 0.0) throw DomainError("alpha_fair_utility: alpha must be >= 0");
  if (alpha == 0.0) return x;
  if (alpha >= 1.0) x = std::max(x, log_floor);
  if (alpha == 1.0) return std::log(x);
  return std::pow(x, 1.0 - alpha) / (1.0 - alpha);
}

template <typename Count>
double cooperative_terminal_reward(std::span<const Count> success_counts, double alpha,
                                   double log_floor = 1e-2) {
  double total = 0.0;
  for (auto x : success_counts) total += alpha_fair_utility(static_cast<double>(x), alpha, log_floor);
  return total;
}

inline double cooperative_terminal_reward(const std::vector<int>& counts, double alpha,
                                          double log_floor = 1e-2) {
  return cooperative_terminal_reward(std::span<const int>(counts), alpha, log_floor);
}

// R = sum_t gamma^(t-1) r(t) over r(1..T).
inline double accumulated_reward(std::span<const double> rewards, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

// Per-user rewards for a complete outcome log: result[n][s] is the reward credited for slot s.
// Competitive: success indicator. Cooperative: zero except the last slot, which carries the
// network utility sum_n f(x_n) for every user.
inline std::vector<std::vector<double>> reward_trace(std::span<const SlotOutcome> log,
                                                     int num_users, const RewardSpec& spec) {
  std::vector<std::vector<double>> r(static_cast<std::size_t>(num_users),
                                     std::vector<double>(log.size(), 0.0));
  if (!spec.cooperative()) {
    for (std::size_t s = 0; s < log.size(); ++s)
      for (int n = 0; n < num_users; ++n) r[static_cast<std::size_t>(n)][s] = competitive_reward(log[s], n);
    return r;
  }
  if (log.empty()) return r;
  std::vector<int> counts(static_cast<std::size_t>(num_users), 0);
  for (const auto& out : log)
    for (std::size_t n = 0; n < counts.size(); ++n) counts[n] += out.success[n];
  const double terminal = cooperative_terminal_reward(counts, spec.alpha(), spec.log_floor);
  for (auto& row : r) row.back() = terminal;
  return r;
}

}  // namespace dqsa
