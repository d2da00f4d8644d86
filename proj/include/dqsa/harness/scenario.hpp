#pragma once

// Train-evaluate-report pipeline and multi-seed sweeps.
//
// Output files (all carry the config hash):
//   metrics.json  scalar summary with per-seed detail
//   metrics.csv   one row per evaluation seed
//   curve.csv / curve.json  training curve, one row per iteration
//   occupancy.csv  slot,user,action,success for the first episode of the first evaluation seed
//   checkpoint.bin  trained parameters
// No timestamps or timings are written, so a seeded run reproduces every byte.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dqsa/checkpoint.hpp"
#include "dqsa/harness/config.hpp"
#include "dqsa/harness/evaluate.hpp"
#include "dqsa/parallel.hpp"
#include "dqsa/trainer.hpp"

namespace dqsa {

struct ScenarioReport {
  ExperimentConfig config;
  std::uint64_t config_hash = 0;
  nn::NetworkParams params;
  std::vector<IterationMetrics> curve;
  Metrics metrics;
  Allocation allocation = Allocation::Unconverged;  // majority over evaluation seeds
};

// Shortest decimal form that reads back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline nlohmann::json estimate_json(const Estimate& e) { return {{"mean", e.mean}, {"sem", e.sem}}; }

inline nlohmann::json metrics_json(const ScenarioReport& r) {
  const auto& m = r.metrics;
  nlohmann::json j;
  j["config_hash"] = hash_hex(r.config_hash);
  j["scenario"] = r.config.scenario;
  j["seed"] = r.config.seed;
  j["throughput"] = estimate_json(m.throughput);
  j["idle_frac"] = estimate_json(m.idle_frac);
  j["collision_frac"] = estimate_json(m.collision_frac);
  j["sum_rate"] = estimate_json(m.sum_rate);
  j["sum_log_rate"] = estimate_json(m.sum_log_rate);
  j["jain"] = estimate_json(m.jain);
  j["aloha_benchmark"] = estimate_json(m.aloha_benchmark);
  j["allocation"] = allocation_name(r.allocation);
  auto& rates = j["user_rates"] = nlohmann::json::array();
  for (const auto& e : m.user_rates) rates.push_back(estimate_json(e));
  auto& seeds = j["eval_seeds"] = nlohmann::json::array();
  for (const auto& s : m.seeds)
    seeds.push_back({{"seed", s.seed},
                     {"clique_sizes", s.clique_sizes},
                     {"throughput", s.stats.throughput()},
                     {"idle_frac", s.stats.idle_fraction()},
                     {"collision_frac", s.stats.collision_fraction()},
                     {"aloha_benchmark", s.aloha_benchmark},
                     {"sum_rate", s.sum_rate},
                     {"sum_log_rate", s.sum_log_rate},
                     {"jain", s.jain},
                     {"all_on_one", s.all_on_one},
                     {"user_rates", s.rates},
                     {"allocation", allocation_name(s.allocation)}});
  return j;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

}  // namespace detail

inline void write_metrics(const ScenarioReport& r, const std::filesystem::path& dir) {
  const auto hash = hash_hex(r.config_hash);
  detail::open_out(dir / "metrics.json") << metrics_json(r).dump(2) << '\n';
  auto csv = detail::open_out(dir / "metrics.csv");
  csv << "eval_seed,throughput,idle_frac,collision_frac,aloha_benchmark,sum_rate,sum_log_rate,jain,all_on_one,allocation,config_hash\n";
  for (const auto& s : r.metrics.seeds)
    csv << s.seed << ',' << fmt_double(s.stats.throughput()) << ',' << fmt_double(s.stats.idle_fraction()) << ','
        << fmt_double(s.stats.collision_fraction()) << ',' << fmt_double(s.aloha_benchmark) << ','
        << fmt_double(s.sum_rate) << ',' << fmt_double(s.sum_log_rate) << ',' << fmt_double(s.jain) << ','
        << fmt_double(s.all_on_one) << ',' << allocation_name(s.allocation) << ',' << hash << '\n';
}

inline void write_curve(const ScenarioReport& r, const std::filesystem::path& dir) {
  const auto hash = hash_hex(r.config_hash);
  auto csv = detail::open_out(dir / "curve.csv");
  csv << "iteration,mean_reward,throughput,idle_frac,collision_frac,loss,alpha_explore,beta,config_hash\n";
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : r.curve) {
    csv << m.iteration << ',' << fmt_double(m.mean_reward) << ',' << fmt_double(m.throughput) << ','
        << fmt_double(m.idle_frac) << ',' << fmt_double(m.collision_frac) << ',' << fmt_double(m.loss) << ','
        << fmt_double(m.alpha_explore) << ',' << fmt_double(m.beta) << ',' << hash << '\n';
    rows.push_back({{"iteration", m.iteration}, {"mean_reward", m.mean_reward}, {"throughput", m.throughput},
                    {"idle_frac", m.idle_frac}, {"collision_frac", m.collision_frac}, {"loss", m.loss},
                    {"alpha_explore", m.alpha_explore}, {"beta", m.beta}});
  }
  detail::open_out(dir / "curve.json") << nlohmann::json{{"config_hash", hash}, {"curve", rows}}.dump(2) << '\n';
}

inline void write_occupancy(std::span<const SlotOutcome> log, std::uint64_t config_hash,
                            const std::filesystem::path& path) {
  const auto hash = hash_hex(config_hash);
  auto csv = detail::open_out(path);
  csv << "slot,user,action,success,config_hash\n";
  for (const auto& row : occupancy_trace(log))
    csv << row.slot << ',' << row.user << ',' << row.action << ',' << row.success << ',' << hash << '\n';
}

inline void write_report(const ScenarioReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_metrics(r, dir);
  if (!r.curve.empty()) write_curve(r, dir);
  if (!r.metrics.seeds.empty()) write_occupancy(r.metrics.seeds.front().first_episode, r.config_hash, dir / "occupancy.csv");
  nn::save_checkpoint((dir / "checkpoint.bin").string(), r.params, r.config_hash);
}

struct RunOptions {
  std::optional<std::string> checkpoint;  // evaluate these parameters instead of training
  int workers = 1;
  std::function<void(const IterationMetrics&)> on_iteration;
};

inline ScenarioReport run_scenario(ExperimentConfig cfg, const RunOptions& opts = {}) {
  cfg.train.seed = cfg.seed;
  cfg.train.workers = opts.workers;
  cfg.validate();
  ScenarioReport r;
  r.config = cfg;
  r.config_hash = config_hash(cfg);
  if (opts.checkpoint) {
    r.params = nn::load_checkpoint(*opts.checkpoint).params;
  } else {
    auto result = train(cfg.train, [&](const IterationMetrics& m, const TrainerState&) {
      if (opts.on_iteration) opts.on_iteration(m);
    });
    r.params = std::move(result.params);
    r.curve = std::move(result.curve);
  }
  r.metrics = evaluate_policy(r.params, cfg, opts.workers);
  std::vector<Allocation> labels;
  for (const auto& s : r.metrics.seeds) labels.push_back(s.allocation);
  r.allocation = majority_allocation(labels);
  return r;
}

// One full run per master seed; seeds run concurrently, each single-threaded inside.
inline std::vector<ScenarioReport> sweep(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds,
                                         int workers = 1) {
  std::vector<ScenarioReport> reports(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), workers, [&](int i) {
    auto cfg = base;
    cfg.seed = seeds[static_cast<std::size_t>(i)];
    reports[static_cast<std::size_t>(i)] = run_scenario(cfg);
  });
  return reports;
}

inline void write_sweep_summary(const std::vector<ScenarioReport>& reports, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto csv = detail::open_out(dir / "summary.csv");
  csv << "seed,throughput,throughput_sem,collision_frac,aloha_benchmark,sum_rate,sum_log_rate,jain,allocation,config_hash\n";
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : reports) {
    const auto& m = r.metrics;
    csv << r.config.seed << ',' << fmt_double(m.throughput.mean) << ',' << fmt_double(m.throughput.sem) << ','
        << fmt_double(m.collision_frac.mean) << ',' << fmt_double(m.aloha_benchmark.mean) << ','
        << fmt_double(m.sum_rate.mean) << ',' << fmt_double(m.sum_log_rate.mean) << ',' << fmt_double(m.jain.mean)
        << ',' << allocation_name(r.allocation) << ',' << hash_hex(r.config_hash) << '\n';
    rows.push_back(metrics_json(r));
  }
  detail::open_out(dir / "summary.json") << rows.dump(2) << '\n';
}

}  // namespace dqsa
