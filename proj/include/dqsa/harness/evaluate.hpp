#pragma once

// Frozen-policy evaluation, Aloha evaluation, occupancy traces and allocation labels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dqsa/baseline.hpp"
#include "dqsa/channel_stats.hpp"
#include "dqsa/harness/config.hpp"
#include "dqsa/parallel.hpp"
#include "dqsa/rewards.hpp"
#include "dqsa/trainer.hpp"

namespace dqsa {

struct Estimate {
  double mean = 0.0;
  double sem = 0.0;  // standard error of the mean across seeds
};

inline Estimate estimate(std::span<const double> samples) {
  Estimate e;
  const auto n = static_cast<double>(samples.size());
  if (samples.empty()) return e;
  for (double v : samples) e.mean += v;
  e.mean /= n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - e.mean) * (v - e.mean);
    e.sem = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

inline double jain_index(std::span<const double> x) {
  double s = 0.0, s2 = 0.0;
  for (double v : x) {
    s += v;
    s2 += v * v;
  }
  return s2 > 0.0 ? s * s / (static_cast<double>(x.size()) * s2) : 0.0;
}

// Successful slots per user over the last `window` slots of the log, divided by the window.
inline std::vector<double> user_rates(std::span<const SlotOutcome> log, int num_users, int window) {
  std::vector<double> r(static_cast<std::size_t>(num_users), 0.0);
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(window), log.size());
  if (w == 0) return r;
  for (std::size_t s = log.size() - w; s < log.size(); ++s)
    for (int n = 0; n < num_users; ++n) r[static_cast<std::size_t>(n)] += log[s].success[static_cast<std::size_t>(n)];
  for (double& v : r) v /= static_cast<double>(w);
  return r;
}

// Fraction of (clique, slot) pairs, over cliques of two or more users, in which every member
// transmitted on one and the same channel: the all-transmit trap.
inline double all_on_one_fraction(std::span<const SlotOutcome> log, const std::vector<std::vector<int>>& cliques) {
  long hits = 0, total = 0;
  for (const auto& out : log)
    for (const auto& clique : cliques) {
      if (clique.size() < 2) continue;
      ++total;
      const Action first = out.actions[static_cast<std::size_t>(clique[0])];
      bool same = first != 0;
      for (int n : clique) same = same && out.actions[static_cast<std::size_t>(n)] == first;
      hits += same;
    }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

// ---- allocation labels ----

enum class Allocation { OrthogonalFixed, TdmaShare, EqualShare, Unconverged };

inline const char* allocation_name(Allocation a) {
  switch (a) {
    case Allocation::OrthogonalFixed: return "orthogonal-fixed";
    case Allocation::TdmaShare: return "tdma-share";
    case Allocation::EqualShare: return "equal-share";
    case Allocation::Unconverged: return "unconverged";
  }
  return "unconverged";
}

struct ClassifierTolerances {
  double fixed_occupancy = 0.95;   // owner's share of slots on its channel
  double max_collisions = 0.05;    // collided channel-slots / channel-slots
  double tdma_center = 0.5;
  double tdma_band = 0.10;
  double equal_band = 0.15;        // relative to the mean per-user rate
  double coordination_margin = 1.15;  // equal share must beat uncoordinated access by this factor
};

// Best per-user success rate of symmetric random access when each of N users picks each of K
// channels independently with probability q <= 1/K: rate(q) = K q (1-q)^(N-1), maximised at
// q = min(1/N, 1/K).
inline double symmetric_random_access_rate(int num_users, int num_channels) {
  const double q = 1.0 / std::max(num_users, num_channels);
  return num_channels * q * std::pow(1.0 - q, num_users - 1);
}

// Labels the occupancy pattern of a single clique over the last `window` slots. Occupancy means
// successful use: a user "holds" a channel in a slot when it transmitted there alone.
inline Allocation classify_allocation(std::span<const SlotOutcome> log, int num_users, int num_channels,
                                      int window, const ClassifierTolerances& tol = {}) {
  if (window < 50) throw DomainError("classify_allocation: window must be >= 50 slots");
  const auto w = std::min<std::size_t>(static_cast<std::size_t>(window), log.size());
  if (w == 0) return Allocation::Unconverged;
  const auto recent = log.subspan(log.size() - w);

  const auto n_idx = static_cast<std::size_t>(num_users);
  std::vector<std::vector<double>> held(static_cast<std::size_t>(num_channels) + 1, std::vector<double>(n_idx, 0.0));
  long collisions = 0;
  for (const auto& out : recent) {
    std::vector<int> tx(static_cast<std::size_t>(num_channels) + 1, 0);
    for (std::size_t n = 0; n < n_idx; ++n) {
      ++tx[static_cast<std::size_t>(out.actions[n])];
      if (out.success[n]) held[static_cast<std::size_t>(out.actions[n])][n] += 1.0;
    }
    for (int k = 1; k <= num_channels; ++k) collisions += tx[static_cast<std::size_t>(k)] > 1;
  }
  const double slots = static_cast<double>(w);
  for (auto& row : held)
    for (double& v : row) v /= slots;
  const bool collision_free = static_cast<double>(collisions) / (slots * num_channels) <= tol.max_collisions;

  int fixed_channels = 0, shared_channels = 0;
  std::vector<int> owner(n_idx, 0);
  for (int k = 1; k <= num_channels; ++k) {
    const auto& row = held[static_cast<std::size_t>(k)];
    int big = 0, half = 0;
    for (std::size_t n = 0; n < n_idx; ++n) {
      if (row[n] >= tol.fixed_occupancy) {
        ++big;
        ++owner[n];
      }
      if (std::abs(row[n] - tol.tdma_center) <= tol.tdma_band) ++half;
    }
    fixed_channels += big == 1;
    shared_channels += half == 2;
  }
  const bool distinct_owners = std::all_of(owner.begin(), owner.end(), [](int c) { return c <= 1; });
  if (collision_free && distinct_owners && fixed_channels == num_channels) return Allocation::OrthogonalFixed;
  if (collision_free && shared_channels >= 1) return Allocation::TdmaShare;

  const auto rates = user_rates(recent, num_users, static_cast<int>(w));
  double mean = 0.0;
  for (double r : rates) mean += r;
  mean /= static_cast<double>(num_users);
  // Equal rates alone do not show convergence: a uniformly random policy is symmetric too.
  const double floor = tol.coordination_margin * symmetric_random_access_rate(num_users, num_channels);
  if (mean > floor && std::all_of(rates.begin(), rates.end(),
                                [&](double r) { return std::abs(r - mean) <= tol.equal_band * mean; }))
    return Allocation::EqualShare;
  return Allocation::Unconverged;
}

// Most frequent label; ties resolve to the later label in enum order (towards unconverged).
inline Allocation majority_allocation(std::span<const Allocation> labels) {
  std::array<int, 4> count{};
  for (auto a : labels) ++count[static_cast<std::size_t>(a)];
  std::size_t best = 3;
  for (std::size_t i = 0; i < 4; ++i)
    if (count[i] > count[best]) best = i;
  return static_cast<Allocation>(best);
}

// ---- occupancy trace ----

struct OccupancyRow {
  int slot = 0;
  int user = 0;
  Action action = 0;
  int success = 0;
};

inline std::vector<OccupancyRow> occupancy_trace(std::span<const SlotOutcome> log) {
  std::vector<OccupancyRow> rows;
  for (const auto& out : log)
    for (std::size_t n = 0; n < out.actions.size(); ++n)
      rows.push_back({out.slot, static_cast<int>(n), out.actions[n], out.success[n]});
  return rows;
}

// ---- evaluation ----

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<int> clique_sizes;
  ChannelStats stats;
  double aloha_benchmark = 0.0;
  std::vector<double> rates;      // per user, averaged over episodes
  double sum_rate = 0.0;
  double sum_log_rate = 0.0;
  double jain = 0.0;
  double all_on_one = 0.0;
  Allocation allocation = Allocation::Unconverged;
  std::vector<SlotOutcome> first_episode;  // kept for the occupancy trace
};

struct Metrics {
  Estimate throughput, idle_frac, collision_frac;
  Estimate sum_rate, sum_log_rate, jain;
  Estimate aloha_benchmark;        // analytic optimum for the realized clique sizes
  std::vector<Estimate> user_rates;  // only when every seed has the same user count
  std::vector<SeedResult> seeds;
};

namespace detail {

inline EnvConfig eval_env(const ExperimentConfig& cfg, Rng& rng) {
  const auto& t = cfg.train;
  EnvConfig env = t.env;
  if (t.cliques) {
    auto sampler = *t.cliques;
    sampler.count = cfg.eval.clique_count;
    env = EnvConfig::from_clique_sizes(sampler.draw(rng), t.env.num_channels, t.env.horizon);
    env.capacities = t.env.capacities;
  }
  env.horizon = cfg.eval_horizon();
  return env;
}

inline std::vector<int> clique_sizes(const EnvConfig& env) {
  std::vector<int> s;
  for (const auto& c : env.clique_partition()) s.push_back(static_cast<int>(c.size()));
  return s;
}

// Per-seed summary of a set of episode logs on one topology.
inline void summarize(SeedResult& r, const EnvConfig& env, const std::vector<std::vector<SlotOutcome>>& logs,
                      const ExperimentConfig& cfg) {
  const auto cliques = env.clique_partition();
  const int window = std::min(cfg.eval.rate_window, env.horizon);
  r.clique_sizes = clique_sizes(env);
  r.aloha_benchmark = aloha_benchmark(r.clique_sizes);
  r.rates.assign(static_cast<std::size_t>(env.num_users), 0.0);
  std::vector<Allocation> labels;
  for (const auto& log : logs) {
    r.stats += channel_stats(log, cliques, env.num_channels);
    const auto rates = user_rates(log, env.num_users, window);
    for (std::size_t n = 0; n < rates.size(); ++n) r.rates[n] += rates[n] / static_cast<double>(logs.size());
    r.all_on_one += all_on_one_fraction(log, cliques) / static_cast<double>(logs.size());
    if (cliques.size() == 1 && window >= 50)
      labels.push_back(classify_allocation(log, env.num_users, env.num_channels, window));
  }
  r.sum_rate = 0.0;
  r.sum_log_rate = 0.0;
  for (double x : r.rates) {
    r.sum_rate += x;
    r.sum_log_rate += std::log(std::max(x, cfg.train.reward.log_floor));
  }
  r.jain = jain_index(r.rates);
  if (!labels.empty()) r.allocation = majority_allocation(labels);
  r.first_episode = logs.front();
}

inline Metrics aggregate(std::vector<SeedResult> seeds) {
  Metrics m;
  std::vector<double> thr, idle, col, sr, slr, jain, aloha;
  bool same_users = true;
  for (const auto& s : seeds) {
    thr.push_back(s.stats.throughput());
    idle.push_back(s.stats.idle_fraction());
    col.push_back(s.stats.collision_fraction());
    sr.push_back(s.sum_rate);
    slr.push_back(s.sum_log_rate);
    jain.push_back(s.jain);
    aloha.push_back(s.aloha_benchmark);
    same_users = same_users && s.rates.size() == seeds.front().rates.size();
  }
  m.throughput = estimate(thr);
  m.idle_frac = estimate(idle);
  m.collision_frac = estimate(col);
  m.sum_rate = estimate(sr);
  m.sum_log_rate = estimate(slr);
  m.jain = estimate(jain);
  m.aloha_benchmark = estimate(aloha);
  if (same_users && !seeds.empty())
    for (std::size_t n = 0; n < seeds.front().rates.size(); ++n) {
      std::vector<double> v;
      for (const auto& s : seeds) v.push_back(s.rates[n]);
      m.user_rates.push_back(estimate(v));
    }
  m.seeds = std::move(seeds);
  return m;
}

inline std::uint64_t eval_seed(const ExperimentConfig& cfg, int index) {
  return derive_seed(cfg.seed, {0xE7A1, static_cast<std::uint64_t>(index)});
}

}  // namespace detail

// Runs cfg.eval.episodes frozen-network episodes for each of cfg.eval.seeds seeds.
inline Metrics evaluate_policy(const nn::NetworkParams& params, const ExperimentConfig& cfg, int workers = 1) {
  cfg.validate();
  if (params.shape().num_channels != cfg.train.env.num_channels)
    throw ConfigError("evaluate: checkpoint has K=" + std::to_string(params.shape().num_channels) +
                      " but the config has K=" + std::to_string(cfg.train.env.num_channels));
  std::vector<SeedResult> results(static_cast<std::size_t>(cfg.eval.seeds));
  parallel_for(cfg.eval.seeds, workers, [&](int s) {
    auto& r = results[static_cast<std::size_t>(s)];
    r.seed = detail::eval_seed(cfg, s);
    auto topo_rng = make_rng(r.seed, {0});
    const auto env = detail::eval_env(cfg, topo_rng);
    std::vector<std::vector<SlotOutcome>> logs;
    for (int e = 0; e < cfg.eval.episodes; ++e) {
      auto rng = make_rng(r.seed, {1, static_cast<std::uint64_t>(e)});
      logs.push_back(collect_episode(env, params, cfg.eval.policy, cfg.train.reward, rng).outcomes);
    }
    detail::summarize(r, env, logs, cfg);
  });
  return detail::aggregate(std::move(results));
}

// One Aloha episode: every user in clique j transmits with probability 1/n_j.
inline std::vector<SlotOutcome> aloha_episode(const EnvConfig& env_cfg, ChannelRule rule, Rng& rng) {
  Environment env(env_cfg);
  std::vector<AlohaPolicy> policy(static_cast<std::size_t>(env_cfg.num_users));
  for (const auto& clique : env.cliques())
    for (int n : clique)
      policy[static_cast<std::size_t>(n)] = {optimal_attempt_prob(static_cast<int>(clique.size())), rule};
  std::vector<Action> a(static_cast<std::size_t>(env_cfg.num_users));
  while (!env.done()) {
    for (std::size_t n = 0; n < a.size(); ++n) a[n] = aloha_act(policy[n], env_cfg.num_channels, rng);
    env.step(a);
  }
  return env.outcome_log();
}

// Same seeds, topologies and summaries as evaluate_policy, with Aloha in place of the network.
inline Metrics evaluate_aloha(const ExperimentConfig& cfg, ChannelRule rule = ChannelRule::Single, int workers = 1) {
  cfg.validate();
  std::vector<SeedResult> results(static_cast<std::size_t>(cfg.eval.seeds));
  parallel_for(cfg.eval.seeds, workers, [&](int s) {
    auto& r = results[static_cast<std::size_t>(s)];
    r.seed = detail::eval_seed(cfg, s);
    auto topo_rng = make_rng(r.seed, {0});
    const auto env = detail::eval_env(cfg, topo_rng);
    std::vector<std::vector<SlotOutcome>> logs;
    for (int e = 0; e < cfg.eval.episodes; ++e) {
      auto rng = make_rng(r.seed, {2, static_cast<std::uint64_t>(e)});
      logs.push_back(aloha_episode(env, rule, rng));
    }
    detail::summarize(r, env, logs, cfg);
  });
  return detail::aggregate(std::move(results));
}

}  // namespace dqsa
