#pragma once

// Per-user agent: encodes the last (action, ACK) pair, runs the shared network with a private
// LSTM state and samples an action from the softmax-plus-uniform mixture
//
//   Pr(a) = (1 - alpha) exp(beta Q(a)) / sum_b exp(beta Q(b)) + alpha / (K + 1).

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "dqsa/env.hpp"
#include "dqsa/error.hpp"
#include "dqsa/nn.hpp"
#include "dqsa/random.hpp"

namespace dqsa {

struct PolicyParams {
  double alpha_explore = 0.005;
  double beta = 20.0;

  void validate() const {
    if (!(alpha_explore >= 0.0 && alpha_explore <= 1.0))
      throw ConfigError("policy: alpha_explore must lie in [0,1]");
    if (!(beta >= 0.0)) throw ConfigError("policy: beta must be >= 0");
  }
};

// [one-hot previous action (K+1) | capacities (K) | ACK (1)]
inline nn::Vector encode_input(Action last_action, int last_ack, std::span<const double> capacities) {
  const int k = static_cast<int>(capacities.size());
  if (k < 1) throw DomainError("encode_input: capacities must be non-empty");
  if (last_action < 0 || last_action > k) throw DomainError("encode_input: action outside {0..K}");
  if (last_ack != 0 && last_ack != 1) throw DomainError("encode_input: ack must be 0 or 1");
  if (last_ack == 1 && last_action == 0) throw DomainError("encode_input: ACK without a transmission");
  nn::Vector x = nn::Vector::Zero(2 * k + 2);
  x[last_action] = 1.0;
  for (int c = 0; c < k; ++c) x[k + 1 + c] = capacities[static_cast<std::size_t>(c)];
  x[2 * k + 1] = static_cast<double>(last_ack);
  return x;
}

inline std::vector<double> policy_distribution(std::span<const double> q, const PolicyParams& policy) {
  if (q.empty()) throw DomainError("policy_distribution: empty Q vector");
  for (double v : q)
    if (!std::isfinite(v)) throw NumericError("policy_distribution: non-finite Q value");
  const double qmax = *std::max_element(q.begin(), q.end());
  std::vector<double> p(q.size());
  double z = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) z += p[a] = std::exp(policy.beta * (q[a] - qmax));
  const double uniform = policy.alpha_explore / static_cast<double>(q.size());
  for (double& v : p) v = (1.0 - policy.alpha_explore) * v / z + uniform;
  return p;
}

// Lowest index wins ties.
inline int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct AgentState {
  nn::LstmState lstm;
  Action last_action = 0;
  int last_ack = 0;
  int user_id = 0;

  static AgentState initial(int user_id, const nn::NetworkShape& shape) {
    return {nn::LstmState::zeros(shape.lstm_width), 0, 0, user_id};
  }
};

struct ActResult {
  Action action = 0;
  std::vector<double> q;
};

// Episode-start default is (no transmission, no ACK).
inline void observe(AgentState& agent, Action action_taken, int ack) {
  if (action_taken == 0 && ack != 0) throw DomainError("observe: ACK without a transmission");
  agent.last_action = action_taken;
  agent.last_ack = ack;
}

inline ActResult act(AgentState& agent, const nn::NetworkParams& params, const PolicyParams& policy,
                     std::span<const double> capacities, Rng& rng) {
  const auto x = encode_input(agent.last_action, agent.last_ack, capacities);
  auto r = nn::forward(params, x, agent.lstm);
  agent.lstm = std::move(r.state);
  ActResult out;
  out.q.assign(r.q.data(), r.q.data() + r.q.size());
  const auto probs = policy_distribution(out.q, policy);
  out.action = sample_categorical(probs, rng);
  return out;
}

}  // namespace dqsa
