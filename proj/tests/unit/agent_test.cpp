#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dqsa/agent.hpp"
#include "test_oracles.hpp"

namespace dqsa {
namespace {

std::vector<double> to_vec(const nn::Vector& v) { return {v.data(), v.data() + v.size()}; }

TEST(EncodeInput, TransmissionWithAck) {
  const std::vector<double> caps{1, 1};
  EXPECT_EQ(to_vec(encode_input(1, 1, caps)), (std::vector<double>{0, 1, 0, 1, 1, 1}));
}

TEST(EncodeInput, SilenceAndEpisodeStart) {
  const std::vector<double> caps{1, 1};
  EXPECT_EQ(to_vec(encode_input(0, 0, caps)), (std::vector<double>{1, 0, 0, 1, 1, 0}));
  const auto start = AgentState::initial(0, nn::NetworkShape{2, 4, 4, 4});
  EXPECT_EQ(to_vec(encode_input(start.last_action, start.last_ack, caps)),
            (std::vector<double>{1, 0, 0, 1, 1, 0}));
}

TEST(EncodeInput, CarriesCapacities) {
  const std::vector<double> caps{0.5, 2.0, 1.0};
  EXPECT_EQ(to_vec(encode_input(3, 0, caps)), (std::vector<double>{0, 0, 0, 1, 0.5, 2.0, 1.0, 0}));
}

TEST(EncodeInput, RejectsBadArguments) {
  const std::vector<double> caps{1, 1};
  EXPECT_THROW(encode_input(3, 0, caps), DomainError);
  EXPECT_THROW(encode_input(0, 1, caps), DomainError);
  EXPECT_THROW(encode_input(1, 2, caps), DomainError);
}

TEST(PolicyDistribution, BetaZeroIsUniform) {
  const std::vector<double> q{3.0, -1.0, 0.5};
  for (double p : policy_distribution(q, {0.0, 0.0})) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
}

TEST(PolicyDistribution, AlphaOneIsUniform) {
  const std::vector<double> q{3.0, -1.0, 0.5, 9.0};
  for (double p : policy_distribution(q, {1.0, 50.0})) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(PolicyDistribution, SoftmaxExample) {
  const std::vector<double> q{0.0, std::log(3.0)};
  const auto p = policy_distribution(q, {0.0, 1.0});
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(PolicyDistribution, LargeBetaStaysFinite) {
  const std::vector<double> q{100.0, 100.5, -3.0};
  const auto p = policy_distribution(q, {0.0, 1e6});
  EXPECT_GE(p[1], 1.0 - 1e-6);
  double sum = 0.0;
  for (double v : p) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(PolicyDistribution, NonFiniteQIsNumericError) {
  const std::vector<double> q{0.0, std::nan("")};
  EXPECT_THROW(policy_distribution(q, {}), NumericError);
}

TEST(PolicyDistribution, EmpiricalFrequenciesWithinThreeSigma) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> q(3);
    for (auto& v : q) v = 2.0 * uniform01(rng) - 1.0;
    const PolicyParams pol{0.3 * uniform01(rng), 5.0 * uniform01(rng)};
    const auto p = policy_distribution(q, pol);
    const int draws = 100000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(sample_categorical(p, rng))];
    for (std::size_t a = 0; a < 3; ++a) {
      const double se = std::sqrt(p[a] * (1.0 - p[a]) / draws);
      EXPECT_LE(std::abs(counts[a] / static_cast<double>(draws) - p[a]), 3.0 * se + 1e-12);
    }
  }
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1);
  EXPECT_EQ(argmax(std::vector<double>{2.0, 2.0}), 0);
}

TEST(Act, UniformPolicyIgnoresNetwork) {
  const std::vector<double> q{0.0, 10.0, -5.0};
  const auto params = oracle::rigged_params(2, q);
  const std::vector<double> caps{1, 1};
  Rng rng(3);
  auto agent = AgentState::initial(0, params.shape());
  std::vector<int> counts(3, 0);
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(act(agent, params, {1.0, 20.0}, caps, rng).action)];
  const double se = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / draws);
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(draws), 1.0 / 3.0, 4.0 * se);
}

TEST(Act, HugeBetaPicksArgmax) {
  const std::vector<double> q{0.0, 0.1, -0.2};
  const auto params = oracle::rigged_params(2, q);
  const std::vector<double> caps{1, 1};
  Rng rng(4);
  auto agent = AgentState::initial(0, params.shape());
  for (int i = 0; i < 1000; ++i) {
    const auto r = act(agent, params, {0.0, 1e6}, caps, rng);
    EXPECT_EQ(r.action, 1);
    ASSERT_EQ(r.q.size(), 3u);
    EXPECT_NEAR(r.q[1], 0.1, 1e-15);
  }
}

TEST(Act, SeededSequenceIsReproducible) {
  Rng init(11);
  const auto params = nn::init_params(nn::NetworkShape{2, 6, 8, 5}, init);
  const std::vector<double> caps{1, 1};
  auto run = [&] {
    Rng rng(77);
    auto agent = AgentState::initial(0, params.shape());
    std::vector<Action> seq;
    for (int i = 0; i < 50; ++i) {
      const auto r = act(agent, params, {0.1, 2.0}, caps, rng);
      seq.push_back(r.action);
      observe(agent, r.action, r.action == 1 ? 1 : 0);
    }
    return seq;
  };
  EXPECT_EQ(run(), run());
}

TEST(Observe, UpdatesNextEncoding) {
  auto agent = AgentState::initial(3, nn::NetworkShape{2, 4, 4, 4});
  observe(agent, 2, 1);
  const std::vector<double> caps{1, 1};
  EXPECT_EQ(to_vec(encode_input(agent.last_action, agent.last_ack, caps)),
            (std::vector<double>{0, 0, 1, 1, 1, 1}));
  EXPECT_THROW(observe(agent, 0, 1), DomainError);
  agent = AgentState::initial(3, nn::NetworkShape{2, 4, 4, 4});
  EXPECT_EQ(agent.last_action, 0);
  EXPECT_EQ(agent.last_ack, 0);
  EXPECT_TRUE(agent.lstm.h.isZero());
}

TEST(PolicyParams, Validation) {
  EXPECT_THROW((PolicyParams{1.5, 1.0}.validate()), ConfigError);
  EXPECT_THROW((PolicyParams{0.1, -1.0}.validate()), ConfigError);
  EXPECT_NO_THROW((PolicyParams{0.0, 0.0}.validate()));
}

}  // namespace
}  // namespace dqsa
