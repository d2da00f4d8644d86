// dqsa: train, evaluate and inspect multi-user spectrum access policies.
//
//   dqsa [--config F] [--scenario S] [--seed N] [--out DIR] [--workers N] [--checkpoint F] <command> ...

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dqsa/gametheory.hpp"
#include "dqsa/harness.hpp"

namespace fs = std::filesystem;
using namespace dqsa;

namespace {

struct Globals {
  std::string config;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int workers = 1;
  std::string checkpoint;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig cfg;
  if (!g.config.empty()) {
    cfg = load_config_file(g.config);
    if (!g.scenario.empty() && g.scenario != cfg.scenario)
      throw ConfigError("--scenario '" + g.scenario + "' conflicts with the config file's '" + cfg.scenario + "'");
  } else {
    cfg = scenario_config(g.scenario.empty() ? "cliques" : g.scenario);
  }
  if (g.seed) cfg.seed = *g.seed;
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void print_summary(const ScenarioReport& r) {
  const auto& m = r.metrics;
  std::printf("scenario %s  seed %llu  config %s\n", r.config.scenario.c_str(),
              static_cast<unsigned long long>(r.config.seed), hash_hex(r.config_hash).c_str());
  std::printf("throughput %.4f +- %.4f  idle %.4f  collision %.4f  aloha %.4f\n", m.throughput.mean,
              m.throughput.sem, m.idle_frac.mean, m.collision_frac.mean, m.aloha_benchmark.mean);
  std::printf("sum rate %.4f  sum log rate %.4f  jain %.4f  allocation %s\n", m.sum_rate.mean, m.sum_log_rate.mean,
              m.jain.mean, allocation_name(r.allocation));
}

RunOptions run_options(const Globals& g, bool progress) {
  RunOptions opts;
  opts.workers = g.workers;
  if (!g.checkpoint.empty()) opts.checkpoint = g.checkpoint;
  if (progress)
    opts.on_iteration = [](const IterationMetrics& m) {
      if (m.iteration % 100 == 0)
        std::fprintf(stderr, "iter %5d  reward %.3f  throughput %.3f  collision %.3f  loss %.5f\n", m.iteration,
                     m.mean_reward, m.throughput, m.collision_frac, m.loss);
    };
  return opts;
}

void warn_on_foreign_checkpoint(const std::string& path, std::uint64_t hash) {
  const auto ck = nn::load_checkpoint(path);
  if (ck.config_hash != hash)
    std::fprintf(stderr, "note: checkpoint was trained under config %s, evaluating under %s\n",
                 hash_hex(ck.config_hash).c_str(), hash_hex(hash).c_str());
}

int cmd_train(const Globals& g) {
  if (!g.checkpoint.empty()) throw ConfigError("train: --checkpoint is for evaluate and trace");
  const auto r = run_scenario(resolve_config(g), run_options(g, true));
  write_report(r, g.out);
  print_summary(r);
  return 0;
}

int cmd_evaluate(const Globals& g) {
  if (g.checkpoint.empty()) throw ConfigError("evaluate: --checkpoint is required");
  const auto cfg = resolve_config(g);
  warn_on_foreign_checkpoint(g.checkpoint, config_hash(cfg));
  const auto r = run_scenario(cfg, run_options(g, false));
  write_report(r, g.out);
  print_summary(r);
  return 0;
}

int cmd_baseline(const Globals& g, const std::string& rule) {
  if (rule != "single" && rule != "uniform") throw ConfigError("baseline: --channel-rule must be single or uniform");
  ScenarioReport r;
  r.config = resolve_config(g);
  r.config_hash = config_hash(r.config);
  r.metrics = evaluate_aloha(r.config, rule == "single" ? ChannelRule::Single : ChannelRule::Uniform, g.workers);
  std::vector<Allocation> labels;
  for (const auto& s : r.metrics.seeds) labels.push_back(s.allocation);
  r.allocation = majority_allocation(labels);
  fs::create_directories(g.out);
  write_metrics(r, g.out);
  write_occupancy(r.metrics.seeds.front().first_episode, r.config_hash, fs::path(g.out) / "occupancy.csv");
  print_summary(r);
  return 0;
}

int cmd_trace(const Globals& g, int eval_seed) {
  if (g.checkpoint.empty()) throw ConfigError("trace: --checkpoint is required");
  auto cfg = resolve_config(g);
  if (eval_seed < 0 || eval_seed >= cfg.eval.seeds) throw ConfigError("trace: --eval-seed out of range");
  warn_on_foreign_checkpoint(g.checkpoint, config_hash(cfg));
  const auto metrics = evaluate_policy(nn::load_checkpoint(g.checkpoint).params, cfg, g.workers);
  const auto& s = metrics.seeds[static_cast<std::size_t>(eval_seed)];
  fs::create_directories(g.out);
  const auto path = fs::path(g.out) / "occupancy.csv";
  write_occupancy(s.first_episode, config_hash(cfg), path);
  std::printf("%s  %zu rows  allocation %s\n", path.string().c_str(),
              s.first_episode.size() * s.first_episode.front().actions.size(), allocation_name(s.allocation));
  return 0;
}

int cmd_sweep(const Globals& g, int count) {
  if (!g.checkpoint.empty()) throw ConfigError("sweep: --checkpoint is not supported");
  if (count < 1) throw ConfigError("sweep: --seeds must be >= 1");
  const auto cfg = resolve_config(g);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < count; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
  const auto reports = sweep(cfg, seeds, g.workers);
  for (const auto& r : reports) {
    write_report(r, fs::path(g.out) / ("seed_" + std::to_string(r.config.seed)));
    std::printf("seed %-4llu throughput %.4f  collision %.4f  aloha %.4f  %s\n",
                static_cast<unsigned long long>(r.config.seed), r.metrics.throughput.mean,
                r.metrics.collision_frac.mean, r.metrics.aloha_benchmark.mean, allocation_name(r.allocation));
  }
  write_sweep_summary(reports, g.out);
  return 0;
}

struct GameOptions {
  std::string templ;
  std::string profile;
  int users = 2;
  int channels = 1;
  int horizon = 2;
  std::string reward = "competitive";
  double alpha = 0.0;
  double gamma = 1.0;
  std::uint64_t budget = 10'000'000;
};

nlohmann::json check_json(const game::EquilibriumCheck& c) {
  nlohmann::json j{{"holds", c.holds}};
  if (c.witness)
    j["witness"] = {{"user", c.witness->user},
                    {"start", c.witness->start},
                    {"actions", c.witness->actions},
                    {"gain", c.witness->gain}};
  return j;
}

int cmd_verify(const Globals& g, const GameOptions& o) {
  if (o.templ.empty() == o.profile.empty()) throw ConfigError("verify-equilibria: give exactly one of --template or --profile");
  game::PureProfile profile;
  if (!o.templ.empty()) {
    profile = game::template_profile(o.templ, o.users, o.channels, o.horizon);
  } else {
    std::ifstream in(o.profile);
    if (!in) throw IoError("cannot open profile '" + o.profile + "'");
    profile = game::parse_profile(in);
  }
  game::GameSpec spec;
  spec.num_users = static_cast<int>(profile.size());
  spec.num_channels = o.channels;
  spec.horizon = static_cast<int>(profile.front().size());
  spec.budget = o.budget;
  spec.reward.gamma = o.gamma;
  if (o.reward == "competitive")
    spec.reward.kind = Competitive{};
  else if (o.reward == "alpha_fair")
    spec.reward.kind = AlphaFair{o.alpha};
  else
    throw ConfigError("verify-equilibria: --reward must be competitive or alpha_fair");

  nlohmann::json j;
  j["users"] = spec.num_users;
  j["channels"] = spec.num_channels;
  j["horizon"] = spec.horizon;
  j["profile"] = profile;
  j["rewards"] = game::profile_rewards(profile, spec);
  j["nash"] = check_json(game::is_nash(profile, spec));
  j["spe_openloop"] = check_json(game::is_spe_openloop(profile, spec));
  j["pareto"] = game::is_pareto(profile, spec);
  fs::create_directories(g.out);
  std::ofstream(fs::path(g.out) / "equilibria.json") << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Q-learning spectrum access: training, evaluation and equilibrium checks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "INI experiment config")->check(CLI::ExistingFile);
  app.add_option("--scenario", g.scenario, "built-in scenario when no config is given")
      ->check(CLI::IsMember(scenario_names()));
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--checkpoint", g.checkpoint, "trained parameters to evaluate");

  auto* train = app.add_subcommand("train", "train, evaluate and write the full report");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  auto* baseline = app.add_subcommand("baseline", "slotted Aloha with the optimal attempt probability");
  std::string rule = "single";
  baseline->add_option("--channel-rule", rule, "single or uniform")->capture_default_str();
  auto* trace = app.add_subcommand("trace", "per-slot channel occupancy of a checkpoint");
  int eval_seed = 0;
  trace->add_option("--eval-seed", eval_seed, "evaluation seed index")->capture_default_str();
  auto* sweep_cmd = app.add_subcommand("sweep", "train consecutive master seeds and summarize");
  int count = 10;
  sweep_cmd->add_option("--seeds", count, "number of master seeds, starting at --seed")->capture_default_str();

  auto* verify = app.add_subcommand("verify-equilibria", "Nash, open-loop SPE and Pareto checks of a pure profile");
  GameOptions game_opts;
  verify->add_option("--template", game_opts.templ, "fixed-distinct, fixed-packed, rotation or rotation-even");
  verify->add_option("--profile", game_opts.profile, "file with one row of T actions per user");
  verify->add_option("--users", game_opts.users, "N for --template")->capture_default_str();
  verify->add_option("--channels", game_opts.channels, "K")->capture_default_str();
  verify->add_option("--horizon", game_opts.horizon, "T for --template")->capture_default_str();
  verify->add_option("--reward", game_opts.reward, "competitive or alpha_fair")->capture_default_str();
  verify->add_option("--alpha", game_opts.alpha)->capture_default_str();
  verify->add_option("--gamma", game_opts.gamma)->capture_default_str();
  verify->add_option("--budget", game_opts.budget, "enumeration budget")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(g);
    if (*evaluate) return cmd_evaluate(g);
    if (*baseline) return cmd_baseline(g, rule);
    if (*trace) return cmd_trace(g, eval_seed);
    if (*sweep_cmd) return cmd_sweep(g, count);
    if (*verify) return cmd_verify(g, game_opts);
  } catch (const dqsa::Error& e) {
    std::fprintf(stderr, "dqsa: %s\n", e.what());
    return 2;
  }
  return 1;
}
