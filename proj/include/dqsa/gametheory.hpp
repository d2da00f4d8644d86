#pragma once

// Exact oracles for the multichannel random access game on tiny instances.
//
// Strategies are open-loop and pure: user n plays profile[n][t] in slot t regardless of
// history. Equilibrium checks enumerate every open-loop pure deviation, so an SPE verdict here
// means "no profitable open-loop deviation in any continuation game", which is exactly the
// property the closed-form profiles below are claimed to have. Enumeration is all-or-nothing:
// any instance over budget raises BudgetError.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dqsa/env.hpp"
#include "dqsa/error.hpp"
#include "dqsa/rewards.hpp"

namespace dqsa::game {

using PureProfile = std::vector<std::vector<Action>>;                // [n][t]
using MixedProfile = std::vector<std::vector<std::vector<double>>>;  // [n][t][a]
using RewardVector = std::vector<double>;

struct GameSpec {
  int num_users = 2;
  int num_channels = 1;
  int horizon = 1;
  RewardSpec reward;
  std::uint64_t budget = 10'000'000;

  void validate() const {
    if (num_users < 1 || num_channels < 1 || horizon < 1)
      throw ConfigError("game: N, K and T must be >= 1");
    reward.validate();
  }
};

namespace detail {

// (K+1)^e, or budget+1 once it exceeds the budget.
inline std::uint64_t capped_power(int base, int exponent, std::uint64_t budget) {
  std::uint64_t v = 1;
  for (int i = 0; i < exponent; ++i) {
    v *= static_cast<std::uint64_t>(base);
    if (v > budget) return budget + 1;
  }
  return v;
}

inline void require_budget(std::uint64_t needed, std::uint64_t budget, const char* what) {
  if (needed > budget)
    throw BudgetError(std::string(what) + ": enumeration exceeds budget of " + std::to_string(budget));
}

// Decodes `code` into `digits` base-(K+1) digits, most significant first.
inline void decode(std::uint64_t code, int base, std::vector<Action>& digits) {
  for (std::size_t i = digits.size(); i-- > 0;) {
    digits[i] = static_cast<Action>(code % static_cast<std::uint64_t>(base));
    code /= static_cast<std::uint64_t>(base);
  }
}

inline void check_profile(const PureProfile& p, const GameSpec& spec) {
  if (static_cast<int>(p.size()) != spec.num_users)
    throw ShapeError("profile: expected one row per user");
  for (const auto& row : p) {
    if (static_cast<int>(row.size()) != spec.horizon) throw ShapeError("profile: expected T entries per row");
    for (Action a : row)
      if (a < 0 || a > spec.num_channels) throw DomainError("profile: action outside {0..K}");
  }
}

inline std::vector<std::vector<int>> one_clique(int n) {
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  return {all};
}

inline bool dominates(const RewardVector& a, const RewardVector& b, double tol) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i] - tol) return false;
    if (a[i] > b[i] + tol) strict = true;
  }
  return strict;
}

}  // namespace detail

inline constexpr double kTolerance = 1e-9;

// Rewards of the continuation game that starts at slot `start` (0-based): discounting restarts
// at the first slot, and cooperative utilities count only successes from `start` onward.
inline RewardVector profile_rewards(const PureProfile& profile, const GameSpec& spec, int start = 0) {
  detail::check_profile(profile, spec);
  const int n_users = spec.num_users;
  const auto cliques = detail::one_clique(n_users);
  std::vector<Action> slot(static_cast<std::size_t>(n_users));
  RewardVector r(static_cast<std::size_t>(n_users), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(n_users), 0);
  double discount = 1.0;
  for (int t = start; t < spec.horizon; ++t) {
    for (int n = 0; n < n_users; ++n)
      slot[static_cast<std::size_t>(n)] = profile[static_cast<std::size_t>(n)][static_cast<std::size_t>(t)];
    const auto out = resolve_slot(slot, cliques, spec.num_channels, t);
    for (int n = 0; n < n_users; ++n) {
      r[static_cast<std::size_t>(n)] += discount * out.success[static_cast<std::size_t>(n)];
      counts[static_cast<std::size_t>(n)] += out.success[static_cast<std::size_t>(n)];
    }
    if (t + 1 < spec.horizon) discount *= spec.reward.gamma;
  }
  if (spec.reward.cooperative()) {
    const double u = (start < spec.horizon ? discount : 1.0) *
                     cooperative_terminal_reward(counts, spec.reward.alpha(), spec.reward.log_floor);
    std::fill(r.begin(), r.end(), u);
  }
  return r;
}

// Expected rewards of a mixed open-loop profile (independent per-slot draws).
// Competitive rewards use per-slot success probabilities; cooperative ones propagate the exact
// distribution of the success-count vector slot by slot.
inline RewardVector mixed_profile_rewards(const MixedProfile& profile, const GameSpec& spec) {
  spec.validate();
  const int n_users = spec.num_users, k = spec.num_channels, horizon = spec.horizon;
  if (static_cast<int>(profile.size()) != n_users) throw ShapeError("mixed profile: one row per user");
  for (const auto& row : profile) {
    if (static_cast<int>(row.size()) != horizon) throw ShapeError("mixed profile: T entries per row");
    for (const auto& p : row) {
      if (static_cast<int>(p.size()) != k + 1) throw ShapeError("mixed profile: K+1 probabilities");
      double s = 0.0;
      for (double v : p) {
        if (v < 0.0) throw DomainError("mixed profile: negative probability");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-9) throw DomainError("mixed profile: probabilities must sum to 1");
    }
  }
  const auto pr = [&](int n, int t, int a) {
    return profile[static_cast<std::size_t>(n)][static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
  };

  RewardVector r(static_cast<std::size_t>(n_users), 0.0);
  if (!spec.reward.cooperative()) {
    double discount = 1.0;
    for (int t = 0; t < horizon; ++t) {
      for (int n = 0; n < n_users; ++n) {
        double ps = 0.0;
        for (int c = 1; c <= k; ++c) {
          double alone = pr(n, t, c);
          for (int m = 0; m < n_users; ++m)
            if (m != n) alone *= 1.0 - pr(m, t, c);
          ps += alone;
        }
        r[static_cast<std::size_t>(n)] += discount * ps;
      }
      discount *= spec.reward.gamma;
    }
    return r;
  }

  const auto joint = detail::capped_power(k + 1, n_users, spec.budget);
  detail::require_budget(joint, spec.budget, "mixed_profile_rewards");
  const auto cliques = detail::one_clique(n_users);
  std::map<std::vector<int>, double> dist{{std::vector<int>(static_cast<std::size_t>(n_users), 0), 1.0}};
  std::vector<Action> acts(static_cast<std::size_t>(n_users));
  for (int t = 0; t < horizon; ++t) {
    detail::require_budget(joint * dist.size(), spec.budget, "mixed_profile_rewards");
    std::map<std::vector<int>, double> next;
    for (std::uint64_t code = 0; code < joint; ++code) {
      detail::decode(code, k + 1, acts);
      double p = 1.0;
      for (int n = 0; n < n_users && p > 0.0; ++n) p *= pr(n, t, acts[static_cast<std::size_t>(n)]);
      if (p == 0.0) continue;
      const auto out = resolve_slot(acts, cliques, k, t);
      for (const auto& [counts, q] : dist) {
        auto c = counts;
        for (int n = 0; n < n_users; ++n) c[static_cast<std::size_t>(n)] += out.success[static_cast<std::size_t>(n)];
        next[c] += p * q;
      }
    }
    dist = std::move(next);
  }
  const double discount = std::pow(spec.reward.gamma, horizon - 1);
  double expected = 0.0;
  for (const auto& [counts, q] : dist)
    expected += q * cooperative_terminal_reward(counts, spec.reward.alpha(), spec.reward.log_floor);
  std::fill(r.begin(), r.end(), discount * expected);
  return r;
}

struct Deviation {
  int user = 0;
  int start = 0;                 // first slot of the continuation game
  std::vector<Action> actions;   // the deviating user's actions for slots start..T-1
  double gain = 0.0;
};

struct EquilibriumCheck {
  bool holds = true;
  std::optional<Deviation> witness;  // first strictly improving deviation, lexicographic order
};

// Nash check of the continuation game from `start`: every user, every open-loop pure deviation.
inline EquilibriumCheck is_nash(const PureProfile& profile, const GameSpec& spec, int start = 0) {
  spec.validate();
  detail::check_profile(profile, spec);
  const int len = spec.horizon - start;
  const auto per_user = detail::capped_power(spec.num_channels + 1, len, spec.budget);
  detail::require_budget(per_user, spec.budget, "is_nash");
  detail::require_budget(per_user * static_cast<std::uint64_t>(spec.num_users), spec.budget, "is_nash");

  const auto base = profile_rewards(profile, spec, start);
  std::vector<Action> dev(static_cast<std::size_t>(len));
  for (int n = 0; n < spec.num_users; ++n) {
    auto trial = profile;
    for (std::uint64_t code = 0; code < per_user; ++code) {
      detail::decode(code, spec.num_channels + 1, dev);
      std::copy(dev.begin(), dev.end(), trial[static_cast<std::size_t>(n)].begin() + start);
      const double gain = profile_rewards(trial, spec, start)[static_cast<std::size_t>(n)] -
                          base[static_cast<std::size_t>(n)];
      if (gain > kTolerance) return {false, Deviation{n, start, dev, gain}};
    }
  }
  return {};
}

// Subgame perfection restricted to open-loop play: Nash in the continuation from every slot.
inline EquilibriumCheck is_spe_openloop(const PureProfile& profile, const GameSpec& spec) {
  for (int start = 0; start < spec.horizon; ++start) {
    auto check = is_nash(profile, spec, start);
    if (!check.holds) return check;
  }
  return {};
}

// Calls visit(profile) for every pure profile of the game, in lexicographic order.
template <typename Visit>
void for_each_profile(const GameSpec& spec, Visit&& visit) {
  spec.validate();
  const int cells = spec.num_users * spec.horizon;
  const auto total = detail::capped_power(spec.num_channels + 1, cells, spec.budget);
  detail::require_budget(total, spec.budget, "profile enumeration");
  std::vector<Action> flat(static_cast<std::size_t>(cells));
  PureProfile p(static_cast<std::size_t>(spec.num_users), std::vector<Action>(static_cast<std::size_t>(spec.horizon)));
  for (std::uint64_t code = 0; code < total; ++code) {
    detail::decode(code, spec.num_channels + 1, flat);
    for (int n = 0; n < spec.num_users; ++n)
      for (int t = 0; t < spec.horizon; ++t)
        p[static_cast<std::size_t>(n)][static_cast<std::size_t>(t)] =
            flat[static_cast<std::size_t>(n * spec.horizon + t)];
    visit(p);
  }
}

// True iff no pure profile gives every user at least as much and some user strictly more.
inline bool is_pareto(const PureProfile& profile, const GameSpec& spec) {
  const auto mine = profile_rewards(profile, spec);
  bool dominated = false;
  for_each_profile(spec, [&](const PureProfile& other) {
    if (!dominated && detail::dominates(profile_rewards(other, spec), mine, kTolerance)) dominated = true;
  });
  return !dominated;
}

// Nondominated reward vectors over all pure profiles, deduplicated, in lexicographic order.
inline std::vector<RewardVector> pareto_front(const GameSpec& spec) {
  std::vector<RewardVector> all;
  for_each_profile(spec, [&](const PureProfile& p) { all.push_back(profile_rewards(p, spec)); });
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end(),
                        [](const RewardVector& a, const RewardVector& b) {
                          for (std::size_t i = 0; i < a.size(); ++i)
                            if (std::abs(a[i] - b[i]) > kTolerance) return false;
                          return true;
                        }),
            all.end());
  std::vector<RewardVector> front;
  for (const auto& v : all) {
    const bool dominated = std::any_of(all.begin(), all.end(), [&](const RewardVector& o) {
      return detail::dominates(o, v, kTolerance);
    });
    if (!dominated) front.push_back(v);
  }
  return front;
}

// Optimum of  max sum_n gamma^(T-1) f(x_n)  s.t.  sum_n x_n <= K T  (continuous relaxation).
// Stationarity gives x_n^(-alpha) = lambda, i.e. the equal split K T / N for alpha > 0. For
// alpha = 0 every split of K T is optimal; the equal split is returned with `degenerate` set.
struct AlphaFairOptimum {
  std::vector<double> counts;
  double value = 0.0;
  bool integral = false;    // K T / N is a whole number, so slots can be split exactly
  bool degenerate = false;  // alpha = 0: optimum not unique
  double lambda = 0.0;      // Lagrange multiplier (K T / N)^(-alpha), undiscounted
};

inline AlphaFairOptimum alpha_fair_optimum(int n_users, int n_channels, int horizon, double alpha,
                                           double gamma, double log_floor = 1e-2) {
  if (n_users < 1 || n_channels < 1 || horizon < 1) throw DomainError("alpha_fair_optimum: N, K, T must be >= 1");
  if (alpha < 0.0) throw DomainError("alpha_fair_optimum: alpha must be >= 0");
  const double total = static_cast<double>(n_channels) * horizon;
  const double share = total / n_users;
  AlphaFairOptimum opt;
  opt.counts.assign(static_cast<std::size_t>(n_users), share);
  opt.integral = (n_channels * horizon) % n_users == 0;
  opt.degenerate = alpha == 0.0;
  opt.lambda = std::pow(share, -alpha);
  opt.value = std::pow(gamma, horizon - 1) * n_users * alpha_fair_utility(share, alpha, log_floor);
  return opt;
}

struct SpeComparison {
  double spe_reward = 0.0;     // (1 - eps) eps^(N/K - 1)
  double random_reward = 0.0;  // K e^-1 / N
  double ratio() const { return spe_reward / random_reward; }
};

// Per-slot per-user reward at a competitive SPE with attempt probability 1-eps, against random
// access with attempt probability K/N, both in the large-N regime.
inline SpeComparison competitive_spe_reward_comparison(int n_users, int n_channels, double eps) {
  if (n_channels < 1 || n_users < n_channels) throw DomainError("spe comparison: need N >= K >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("spe comparison: eps must lie in (0,1)");
  const double load = static_cast<double>(n_users) / n_channels;
  return {(1.0 - eps) * std::pow(eps, load - 1.0), n_channels * std::exp(-1.0) / n_users};
}

// Closed-form profiles:
//   fixed-distinct  N <= K: user n always on channel n+1.
//   fixed-packed    N > K: user n always on channel (n mod K)+1, so every channel is taken.
//   rotation        every slot fills every channel with a distinct user, rotating (N >= K).
//   rotation-even   the same rotation, required to give each user exactly K T / N slot-channel pairs.
inline PureProfile template_profile(const std::string& name, int n_users, int n_channels, int horizon) {
  if (n_users < 1 || n_channels < 1 || horizon < 1) throw DomainError("template_profile: N, K, T must be >= 1");
  PureProfile p(static_cast<std::size_t>(n_users), std::vector<Action>(static_cast<std::size_t>(horizon), 0));
  if (name == "fixed-distinct") {
    if (n_users > n_channels) throw DomainError("fixed-distinct requires N <= K");
    for (int n = 0; n < n_users; ++n)
      std::fill(p[static_cast<std::size_t>(n)].begin(), p[static_cast<std::size_t>(n)].end(), n + 1);
    return p;
  }
  if (name == "fixed-packed") {
    if (n_users <= n_channels) throw DomainError("fixed-packed requires N > K");
    for (int n = 0; n < n_users; ++n)
      std::fill(p[static_cast<std::size_t>(n)].begin(), p[static_cast<std::size_t>(n)].end(), n % n_channels + 1);
    return p;
  }
  if (name == "rotation" || name == "rotation" || name == "rotation-even") {
    if (n_users < n_channels) throw DomainError(name + " requires N >= K");
    if (name == "rotation-even" && (n_channels * horizon) % n_users != 0)
      throw DomainError("rotation-even requires K T / N to be a whole number");
    for (int t = 0; t < horizon; ++t)
      for (int k = 0; k < n_channels; ++k)
        p[static_cast<std::size_t>((t * n_channels + k) % n_users)][static_cast<std::size_t>(t)] = k + 1;
    return p;
  }
  throw DomainError("unknown profile template '" + name + "'");
}

// N rows of T whitespace-separated integers; blank lines and '#' comments are skipped.
inline PureProfile parse_profile(std::istream& is) {
  PureProfile p;
  std::string line;
  while (std::getline(is, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<Action> row;
    Action a = 0;
    while (ls >> a) row.push_back(a);
    if (!ls.eof()) throw DomainError("profile file: non-integer entry");
    if (!row.empty()) p.push_back(std::move(row));
  }
  if (p.empty()) throw DomainError("profile file: no rows");
  for (const auto& row : p)
    if (row.size() != p.front().size()) throw DomainError("profile file: ragged rows");
  return p;
}

}  // namespace dqsa::game
