#pragma once

// Experiment configuration: the four named scenarios, INI loading and the provenance hash.
//
// An INI file may start with `scenario = <name>` to inherit that preset; every key it sets
// then overrides the preset. Unknown sections or keys are rejected so typos cannot silently
// fall back to defaults.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dqsa/agent.hpp"
#include "dqsa/error.hpp"
#include "dqsa/trainer.hpp"

namespace dqsa {

inline constexpr int kConfigVersion = 1;

struct EvalConfig {
  int episodes = 10;          // per evaluation seed
  int seeds = 5;              // evaluation seeds, derived from the master seed
  int horizon = 0;            // 0: the training horizon
  int rate_window = 100;      // per-user rates use the last min(rate_window, horizon) slots
  int clique_count = 8;       // cliques drawn per evaluation seed when a sampler is configured
  PolicyParams policy{0.005, 20.0};

  void validate() const {
    if (episodes < 1 || seeds < 1) throw ConfigError("eval: episodes and seeds must be >= 1");
    if (horizon < 0) throw ConfigError("eval: horizon must be >= 0");
    if (rate_window < 1) throw ConfigError("eval: rate_window must be >= 1");
    if (clique_count < 1) throw ConfigError("eval: clique_count must be >= 1");
    policy.validate();
  }
};

struct ExperimentConfig {
  std::string scenario = "custom";
  std::uint64_t seed = 1;
  TrainConfig train;
  EvalConfig eval;

  int eval_horizon() const { return eval.horizon > 0 ? eval.horizon : train.env.horizon; }

  void validate() const {
    train.validate();
    eval.validate();
  }
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"cliques", "sumrate-4x2", "competitive-3x2", "lograte-4x2"};
  return names;
}

// Scenario presets. Network and batch sizes are desk-scale: a 3000-iteration run of any
// scenario takes minutes on one core.
inline ExperimentConfig scenario_config(const std::string& name) {
  ExperimentConfig c;
  c.scenario = name;
  auto& t = c.train;
  t.network = {1, 16, 32, 16};
  t.episodes_per_iteration = 16;
  t.iterations = 3000;
  if (name == "cliques") {
    t.env = EnvConfig::single_clique(1, 1, 50);
    t.cliques = CliqueSampler{3, 11, 1};
    t.reward.kind = Competitive{};
  } else if (name == "sumrate-4x2") {
    t.env = EnvConfig::single_clique(4, 2, 50);
    t.reward.kind = AlphaFair{0.0};
  } else if (name == "competitive-3x2") {
    t.env = EnvConfig::single_clique(3, 2, 50);
    t.reward.kind = Competitive{};
  } else if (name == "lograte-4x2") {
    t.env = EnvConfig::single_clique(4, 2, 50);
    t.reward.kind = AlphaFair{1.0};
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return c;
}

namespace detail {

using Ptree = boost::property_tree::ptree;

template <typename T>
T parse_value(const std::string& section, const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (is.fail() || !(is >> std::ws).eof())
    throw ConfigError("config [" + section + "] " + key + ": cannot parse '" + text + "'");
  return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& section, const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) out.push_back(parse_value<T>(section, key, item));
  return out;
}

class Section {
 public:
  Section(const Ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <typename T>
  void get(const std::string& key, T& target) {
    used_.insert(key);
    if (!tree_) return;
    if (auto v = tree_->get_optional<std::string>(key)) target = parse_value<T>(name_, key, *v);
  }
  template <typename T>
  bool get_list(const std::string& key, std::vector<T>& target) {
    used_.insert(key);
    if (!tree_) return false;
    auto v = tree_->get_optional<std::string>(key);
    if (!v) return false;
    target = parse_list<T>(name_, key, *v);
    return true;
  }
  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_)
      if (!used_.count(key)) throw ConfigError("config [" + name_ + "]: unknown key '" + key + "'");
  }

 private:
  const Ptree* tree_;
  std::string name_;
  std::set<std::string> used_;
};

}  // namespace detail

inline ExperimentConfig load_config(std::istream& is) {
  detail::Ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const std::set<std::string> sections{"env", "reward", "train", "policy", "eval"};
  std::optional<std::string> scenario;
  int version = kConfigVersion;
  std::optional<std::uint64_t> seed;
  for (const auto& [key, child] : tree) {
    if (sections.count(key)) continue;
    if (!child.empty()) throw ConfigError("config: unknown section [" + key + "]");
    if (key == "scenario") scenario = child.data();
    else if (key == "version") version = detail::parse_value<int>("", key, child.data());
    else if (key == "seed") seed = detail::parse_value<std::uint64_t>("", key, child.data());
    else throw ConfigError("config: unknown top-level key '" + key + "'");
  }
  if (version != kConfigVersion)
    throw ConfigError("config: unsupported version " + std::to_string(version));

  ExperimentConfig c;
  if (scenario) c = scenario_config(*scenario);
  if (seed) c.seed = *seed;
  auto& t = c.train;

  const auto section = [&](const char* name) {
    return detail::Section(tree.get_child_optional(name).get_ptr(), name);
  };

  auto env = section("env");
  env.get("num_users", t.env.num_users);
  env.get("num_channels", t.env.num_channels);
  env.get("horizon", t.env.horizon);
  env.get_list("capacities", t.env.capacities);
  std::vector<int> sizes;
  if (env.get_list("clique_sizes", sizes)) {
    const auto fixed = EnvConfig::from_clique_sizes(sizes, t.env.num_channels, t.env.horizon);
    t.env.cliques = fixed.cliques;
    t.env.num_users = fixed.num_users;
  }
  std::string topology = t.cliques ? "random" : "fixed";
  env.get("topology", topology);
  if (topology == "random") {
    auto sampler = t.cliques.value_or(CliqueSampler{});
    env.get("clique_min", sampler.min_size);
    env.get("clique_max", sampler.max_size);
    env.get("clique_count", sampler.count);
    t.cliques = sampler;
  } else if (topology == "fixed") {
    t.cliques.reset();
  } else {
    throw ConfigError("config [env] topology: expected 'fixed' or 'random'");
  }
  env.reject_unknown();

  auto reward = section("reward");
  std::string kind = t.reward.cooperative() ? "alpha_fair" : "competitive";
  double alpha = t.reward.cooperative() ? t.reward.alpha() : 0.0;
  reward.get("kind", kind);
  reward.get("alpha", alpha);
  if (kind == "competitive") t.reward.kind = Competitive{};
  else if (kind == "alpha_fair") t.reward.kind = AlphaFair{alpha};
  else throw ConfigError("config [reward] kind: expected 'competitive' or 'alpha_fair'");
  reward.get("gamma", t.reward.gamma);
  reward.get("log_floor", t.reward.log_floor);
  reward.get("scale", t.reward_scale);
  reward.reject_unknown();

  auto train = section("train");
  train.get("iterations", t.iterations);
  train.get("episodes_per_iteration", t.episodes_per_iteration);
  train.get("target_sync_period", t.target_sync_period);
  train.get("learning_rate", t.optimizer.learning_rate);
  train.get("adam_beta1", t.optimizer.beta1);
  train.get("adam_beta2", t.optimizer.beta2);
  train.get("adam_epsilon", t.optimizer.epsilon);
  train.get("grad_clip", t.grad_clip);
  train.get("input_width", t.network.input_width);
  train.get("lstm_width", t.network.lstm_width);
  train.get("head_width", t.network.head_width);
  train.get("workers", t.workers);
  train.reject_unknown();

  auto policy = section("policy");
  policy.get("alpha_start", t.schedule.alpha_start);
  policy.get("alpha_decay", t.schedule.alpha_decay);
  policy.get("alpha_floor", t.schedule.alpha_floor);
  policy.get("beta_start", t.schedule.beta_start);
  policy.get("beta_end", t.schedule.beta_end);
  policy.reject_unknown();

  auto eval = section("eval");
  eval.get("episodes", c.eval.episodes);
  eval.get("seeds", c.eval.seeds);
  eval.get("horizon", c.eval.horizon);
  eval.get("rate_window", c.eval.rate_window);
  eval.get("clique_count", c.eval.clique_count);
  eval.get("alpha", c.eval.policy.alpha_explore);
  eval.get("beta", c.eval.policy.beta);
  eval.reject_unknown();

  t.seed = c.seed;
  c.validate();
  return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return load_config(in);
}

// Every field that influences results. Worker count is excluded: outputs do not depend on it.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  nlohmann::json j;
  j["version"] = kConfigVersion;
  j["scenario"] = c.scenario;
  j["seed"] = c.seed;
  j["env"] = {{"num_users", t.env.num_users},
              {"num_channels", t.env.num_channels},
              {"horizon", t.env.horizon},
              {"capacities", t.env.channel_capacities()},
              {"cliques", t.env.clique_partition()}};
  if (t.cliques)
    j["env"]["sampler"] = {{"min", t.cliques->min_size}, {"max", t.cliques->max_size}, {"count", t.cliques->count}};
  j["reward"] = {{"kind", t.reward.cooperative() ? "alpha_fair" : "competitive"},
                 {"alpha", t.reward.cooperative() ? t.reward.alpha() : 0.0},
                 {"gamma", t.reward.gamma},
                 {"log_floor", t.reward.log_floor},
                 {"scale", t.reward_scale}};
  j["train"] = {{"iterations", t.iterations},
                {"episodes_per_iteration", t.episodes_per_iteration},
                {"target_sync_period", t.target_sync_period},
                {"learning_rate", t.optimizer.learning_rate},
                {"adam_beta1", t.optimizer.beta1},
                {"adam_beta2", t.optimizer.beta2},
                {"adam_epsilon", t.optimizer.epsilon},
                {"grad_clip", t.grad_clip},
                {"input_width", t.network.input_width},
                {"lstm_width", t.network.lstm_width},
                {"head_width", t.network.head_width}};
  j["policy"] = {{"alpha_start", t.schedule.alpha_start},
                 {"alpha_decay", t.schedule.alpha_decay},
                 {"alpha_floor", t.schedule.alpha_floor},
                 {"beta_start", t.schedule.beta_start},
                 {"beta_end", t.schedule.beta_end}};
  j["eval"] = {{"episodes", c.eval.episodes},
               {"seeds", c.eval.seeds},
               {"horizon", c.eval_horizon()},
               {"rate_window", c.eval.rate_window},
               {"clique_count", c.eval.clique_count},
               {"alpha", c.eval.policy.alpha_explore},
               {"beta", c.eval.policy.beta}};
  return j;
}

// FNV-1a over the canonical (sorted-key, compact) JSON form.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dqsa
