#pragma once

// Centralized training with common parameters.
//
// Each iteration rolls M fresh episodes in which every user acts through the same online
// network (each with its own LSTM state), builds double-Q targets, takes one optimizer step on
// the masked squared error over the whole mini-batch and discards the episodes. The target
// network is overwritten by the online one every `target_sync_period` iterations.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dqsa/agent.hpp"
#include "dqsa/channel_stats.hpp"
#include "dqsa/env.hpp"
#include "dqsa/error.hpp"
#include "dqsa/nn.hpp"
#include "dqsa/parallel.hpp"
#include "dqsa/random.hpp"
#include "dqsa/rewards.hpp"

namespace dqsa {

struct PolicySchedule {
  double alpha_start = 0.05;
  double alpha_decay = 0.995;  // multiplicative, per iteration
  double alpha_floor = 0.005;
  double beta_start = 1.0;
  double beta_end = 20.0;      // reached linearly at the last iteration

  PolicyParams at(int iteration, int total_iterations) const {
    PolicyParams p;
    p.alpha_explore = std::max(alpha_floor, alpha_start * std::pow(alpha_decay, iteration));
    const double frac = total_iterations > 1
                            ? static_cast<double>(iteration) / static_cast<double>(total_iterations - 1)
                            : 1.0;
    p.beta = beta_start + (beta_end - beta_start) * std::min(frac, 1.0);
    return p;
  }
};

// Random clique topology: `count` cliques with sizes uniform on [min_size, max_size].
struct CliqueSampler {
  int min_size = 3;
  int max_size = 11;
  int count = 1;

  std::vector<int> draw(Rng& rng) const {
    std::vector<int> sizes(static_cast<std::size_t>(count));
    for (int& s : sizes) s = uniform_int(rng, min_size, max_size);
    return sizes;
  }
  void validate() const {
    if (min_size < 1 || max_size < min_size || count < 1)
      throw ConfigError("clique sampler: need 1 <= min_size <= max_size and count >= 1");
  }
};

struct TrainConfig {
  int iterations = 3000;
  int episodes_per_iteration = 32;
  int target_sync_period = 5;
  nn::NetworkShape network;              // num_channels is taken from env
  nn::AdamConfig optimizer;
  double grad_clip = 1.0;
  PolicySchedule schedule;
  RewardSpec reward;
  EnvConfig env;
  std::optional<CliqueSampler> cliques;  // redraw the topology for every episode
  // Multiplier applied to rewards before they enter targets. Non-positive means automatic:
  // 1/(N T) for cooperative rewards, 1 for competitive ones.
  double reward_scale = 0.0;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const {
    if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
    if (episodes_per_iteration < 1) throw ConfigError("train: episodes_per_iteration must be >= 1");
    if (target_sync_period < 1) throw ConfigError("train: target_sync_period must be >= 1");
    if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be > 0");
    if (workers < 1) throw ConfigError("train: workers must be >= 1");
    reward.validate();
    env.validate();
    if (cliques) cliques->validate();
    network_shape().validate();
  }

  nn::NetworkShape network_shape() const {
    auto s = network;
    s.num_channels = env.num_channels;
    return s;
  }

  double scale_for(int num_users, int horizon) const {
    if (reward_scale > 0.0) return reward_scale;
    return reward.cooperative() ? 1.0 / (static_cast<double>(num_users) * horizon) : 1.0;
  }
};

// One episode of N users over T slots. Step-major matrices hold one column per user.
struct EpisodeTrace {
  int num_users = 0;
  int num_channels = 0;
  int horizon = 0;
  std::vector<std::vector<int>> cliques;
  std::vector<nn::Matrix> inputs;            // [t] (2K+2) x N
  std::vector<nn::Matrix> q;                 // [t] (K+1) x N, online network while acting
  std::vector<std::vector<Action>> actions;  // [t][n]
  std::vector<std::vector<std::uint8_t>> acks;
  std::vector<std::vector<double>> rewards;  // [n][t] raw reward credited for slot t
  std::vector<int> success_counts;
  std::vector<SlotOutcome> outcomes;
};

// Rolls one episode. All users evaluate the same `params`; users differ only through their
// own histories.
inline EpisodeTrace collect_episode(const EnvConfig& env_config, const nn::NetworkParams& params,
                                    const PolicyParams& policy, const RewardSpec& reward, Rng& rng) {
  Environment env(env_config);
  const int n_users = env_config.num_users;
  const int k = env_config.num_channels;
  if (params.shape().num_channels != k)
    throw ConfigError("collect_episode: network K does not match environment K");
  const auto caps = env_config.channel_capacities();

  EpisodeTrace tr;
  tr.num_users = n_users;
  tr.num_channels = k;
  tr.horizon = env_config.horizon;
  tr.cliques = env.cliques();

  auto state = nn::LstmState::zeros(params.shape().lstm_width, n_users);
  std::vector<Action> last_action(static_cast<std::size_t>(n_users), 0);
  std::vector<int> last_ack(static_cast<std::size_t>(n_users), 0);
  std::vector<Action> actions(static_cast<std::size_t>(n_users));

  while (!env.done()) {
    nn::Matrix x(2 * k + 2, n_users);
    for (int n = 0; n < n_users; ++n)
      x.col(n) = encode_input(last_action[static_cast<std::size_t>(n)],
                              last_ack[static_cast<std::size_t>(n)], caps);
    auto out = nn::forward(params, x, state);
    state = std::move(out.state);
    for (int n = 0; n < n_users; ++n) {
      const auto qcol = out.q.col(n);
      const auto probs = policy_distribution(std::span<const double>(qcol.data(), static_cast<std::size_t>(qcol.size())), policy);
      actions[static_cast<std::size_t>(n)] = sample_categorical(probs, rng);
    }
    const auto& outcome = env.step(actions);
    for (int n = 0; n < n_users; ++n) {
      last_action[static_cast<std::size_t>(n)] = actions[static_cast<std::size_t>(n)];
      last_ack[static_cast<std::size_t>(n)] = outcome.ack[static_cast<std::size_t>(n)];
    }
    tr.inputs.push_back(std::move(x));
    tr.q.push_back(std::move(out.q));
    tr.actions.push_back(actions);
    tr.acks.push_back(outcome.ack);
  }
  tr.outcomes = env.outcome_log();
  tr.success_counts = env.success_counts();
  tr.rewards = reward_trace(tr.outcomes, n_users, reward);
  return tr;
}

// Per-step regression targets: the online network's own output with the taken-action entry
// replaced, and a mask selecting that entry.
struct TargetBatch {
  std::vector<nn::Matrix> targets;  // [t] (K+1) x B
  std::vector<nn::Matrix> masks;    // [t] (K+1) x B, one 1 per column
};

// Double-Q targets from precomputed Q sequences. q_online[t] / q_target[t] are the outputs of
// the online and target networks at input t; actions[t][b]; rewards[t][b] is the reward credited
// after the action at t. For t < T-1 the taken entry becomes
//   r + gamma * q_target[t+1](argmax_a q_online[t+1](a));
// at the last step it is r alone.
inline TargetBatch build_targets_from_q(std::span<const nn::Matrix> q_online,
                                        std::span<const nn::Matrix> q_target,
                                        const std::vector<std::vector<Action>>& actions,
                                        const std::vector<std::vector<double>>& rewards, double gamma) {
  const std::size_t steps = q_online.size();
  if (q_target.size() != steps || actions.size() != steps || rewards.size() != steps)
    throw ShapeError("build_targets: sequences must have equal length");
  TargetBatch tb;
  tb.targets.reserve(steps);
  tb.masks.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    nn::Matrix target = q_online[t];
    nn::Matrix mask = nn::Matrix::Zero(target.rows(), target.cols());
    for (Eigen::Index b = 0; b < target.cols(); ++b) {
      const Action a = actions[t][static_cast<std::size_t>(b)];
      double value = rewards[t][static_cast<std::size_t>(b)];
      if (t + 1 < steps) {
        Eigen::Index best = 0;
        q_online[t + 1].col(b).maxCoeff(&best);  // first maximum on ties
        value += gamma * q_target[t + 1](best, b);
      }
      target(a, b) = value;
      mask(a, b) = 1.0;
    }
    tb.targets.push_back(std::move(target));
    tb.masks.push_back(std::move(mask));
  }
  return tb;
}

// A set of equal-length sequences laid side by side (one column per user-episode).
struct SequenceBatch {
  std::vector<nn::Matrix> inputs;               // [t] (2K+2) x B
  std::vector<std::vector<Action>> actions;     // [t][b]
  std::vector<std::vector<double>> rewards;     // [t][b], already scaled for training

  int batch() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].cols()); }
};

inline SequenceBatch stack_episodes(std::span<const EpisodeTrace> episodes,
                                    const std::function<double(const EpisodeTrace&)>& scale_of) {
  SequenceBatch sb;
  if (episodes.empty()) return sb;
  const int steps = episodes[0].horizon;
  int total = 0;
  for (const auto& e : episodes) {
    if (e.horizon != steps) throw ShapeError("stack_episodes: episodes must share the horizon");
    total += e.num_users;
  }
  const auto rows = episodes[0].inputs.empty() ? 0 : episodes[0].inputs[0].rows();
  sb.inputs.assign(static_cast<std::size_t>(steps), nn::Matrix(rows, total));
  sb.actions.assign(static_cast<std::size_t>(steps), std::vector<Action>(static_cast<std::size_t>(total)));
  sb.rewards.assign(static_cast<std::size_t>(steps), std::vector<double>(static_cast<std::size_t>(total)));
  int col = 0;
  for (const auto& e : episodes) {
    const double s = scale_of(e);
    for (int t = 0; t < steps; ++t) {
      sb.inputs[static_cast<std::size_t>(t)].middleCols(col, e.num_users) = e.inputs[static_cast<std::size_t>(t)];
      for (int n = 0; n < e.num_users; ++n) {
        sb.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(col + n)] =
            e.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(n)];
        sb.rewards[static_cast<std::size_t>(t)][static_cast<std::size_t>(col + n)] =
            s * e.rewards[static_cast<std::size_t>(n)][static_cast<std::size_t>(t)];
      }
    }
    col += e.num_users;
  }
  return sb;
}

// Replays every sequence through both networks (each from its own zero state) and forms the
// double-Q targets.
inline TargetBatch build_targets(const SequenceBatch& batch, const nn::NetworkParams& online,
                                 const nn::NetworkParams& target, double gamma) {
  const auto q1 = nn::forward_sequence(online, batch.inputs);
  const auto q2 = nn::forward_sequence(target, batch.inputs);
  return build_targets_from_q(q1, q2, batch.actions, batch.rewards, gamma);
}

struct TrainerState {
  nn::NetworkParams online;   // DQN_1: acts and is trained
  nn::NetworkParams target;   // DQN_2: evaluates the selected next action
  nn::OptimizerState optimizer;
  int iteration = 0;
};

inline TrainerState init_trainer(const TrainConfig& config) {
  config.validate();
  auto rng = make_rng(config.seed, {0x1417});
  TrainerState st;
  st.online = nn::init_params(config.network_shape(), rng);
  st.target = nn::clone_params(st.online);
  st.optimizer = nn::OptimizerState(st.online, config.optimizer);
  return st;
}

struct IterationMetrics {
  int iteration = 0;          // 1-based index of the completed iteration
  double mean_reward = 0.0;   // raw accumulated reward per user, averaged over the batch
  double throughput = 0.0;
  double idle_frac = 0.0;
  double collision_frac = 0.0;
  double loss = 0.0;          // mean masked squared error before the update
  double grad_norm = 0.0;
  double alpha_explore = 0.0;
  double beta = 0.0;
  bool synced = false;
};

// Mean masked squared error gradient step on `batch` against `targets`. Returns (loss, norm).
inline std::pair<double, double> fit_step(TrainerState& state, const SequenceBatch& batch,
                                          const TargetBatch& targets, double grad_clip) {
  auto r = nn::backward_bptt(state.online, batch.inputs, targets.targets, targets.masks);
  const double count = static_cast<double>(batch.batch()) * static_cast<double>(batch.inputs.size());
  if (count > 0.0)
    for (double& g : r.grads.values()) g /= count;
  const double norm = nn::clip_global_norm(r.grads, grad_clip);
  nn::optimizer_step(state.online, r.grads, state.optimizer);
  return {count > 0.0 ? r.loss / count : 0.0, norm};
}

inline EnvConfig episode_env(const TrainConfig& config, Rng& rng) {
  if (!config.cliques) return config.env;
  const auto sizes = config.cliques->draw(rng);
  auto env = EnvConfig::from_clique_sizes(sizes, config.env.num_channels, config.env.horizon, config.env.seed);
  env.capacities = config.env.capacities;
  return env;
}

// Collects the iteration's M episodes. Episode e uses the stream derive_seed(seed, iteration, e),
// so the batch is identical for every worker count.
inline std::vector<EpisodeTrace> collect_batch(const TrainerState& state, const TrainConfig& config,
                                               const PolicyParams& policy) {
  std::vector<EpisodeTrace> episodes(static_cast<std::size_t>(config.episodes_per_iteration));
  parallel_for(config.episodes_per_iteration, config.workers, [&](int e) {
    auto rng = make_rng(config.seed, {static_cast<std::uint64_t>(state.iteration), static_cast<std::uint64_t>(e)});
    const auto env = episode_env(config, rng);
    episodes[static_cast<std::size_t>(e)] = collect_episode(env, state.online, policy, config.reward, rng);
  });
  return episodes;
}

inline IterationMetrics train_iteration(TrainerState& state, const TrainConfig& config) {
  const auto policy = config.schedule.at(state.iteration, config.iterations);
  const auto episodes = collect_batch(state, config, policy);

  IterationMetrics m;
  m.alpha_explore = policy.alpha_explore;
  m.beta = policy.beta;
  ChannelStats stats;
  double reward_sum = 0.0;
  long users = 0;
  for (const auto& e : episodes) {
    stats += channel_stats(e.outcomes, e.cliques, e.num_channels);
    for (const auto& r : e.rewards) reward_sum += accumulated_reward(r, config.reward.gamma);
    users += e.num_users;
  }
  m.mean_reward = users ? reward_sum / static_cast<double>(users) : 0.0;
  m.throughput = stats.throughput();
  m.idle_frac = stats.idle_fraction();
  m.collision_frac = stats.collision_fraction();

  const auto batch = stack_episodes(episodes, [&](const EpisodeTrace& e) {
    return config.scale_for(e.num_users, e.horizon);
  });
  const auto targets = build_targets(batch, state.online, state.target, config.reward.gamma);
  std::tie(m.loss, m.grad_norm) = fit_step(state, batch, targets, config.grad_clip);

  ++state.iteration;
  m.iteration = state.iteration;
  if (state.iteration % config.target_sync_period == 0) {
    nn::copy_into(state.target, state.online);
    m.synced = true;
  }
  return m;
}

struct TrainResult {
  nn::NetworkParams params;
  std::vector<IterationMetrics> curve;
};

// Runs config.iterations iterations. `on_iteration` (optional) sees every iteration's metrics
// and the state after it, e.g. for logging or periodic checkpoints.
inline TrainResult train(
    const TrainConfig& config,
    const std::function<void(const IterationMetrics&, const TrainerState&)>& on_iteration = {}) {
  auto state = init_trainer(config);
  TrainResult result;
  result.curve.reserve(static_cast<std::size_t>(config.iterations));
  for (int i = 0; i < config.iterations; ++i) {
    result.curve.push_back(train_iteration(state, config));
    if (on_iteration) on_iteration(result.curve.back(), state);
  }
  result.params = std::move(state.online);
  return result;
}

}  // namespace dqsa
