#include <gtest/gtest.h>

#include <cmath>

#include "dqsa/baseline.hpp"

namespace dqsa {
namespace {

TEST(OptimalAttemptProb, InverseCliqueSize) {
  EXPECT_DOUBLE_EQ(optimal_attempt_prob(1), 1.0);
  EXPECT_DOUBLE_EQ(optimal_attempt_prob(4), 0.25);
  EXPECT_DOUBLE_EQ(optimal_attempt_prob(11), 1.0 / 11.0);
  EXPECT_THROW(optimal_attempt_prob(0), DomainError);
}

TEST(AlohaAnalytic, KnownValues) {
  EXPECT_NEAR(aloha_throughput_analytic(3, 1.0 / 3.0), 4.0 / 9.0, 1e-15);
  EXPECT_DOUBLE_EQ(aloha_throughput_analytic(1, 1.0), 1.0);
  EXPECT_NEAR(aloha_throughput_analytic(100, 0.01), 0.3697, 1e-4);
}

TEST(AlohaAnalytic, OptimumBandForCliqueRange) {
  for (int n = 3; n <= 11; ++n) {
    const double v = aloha_throughput_analytic(n, optimal_attempt_prob(n));
    EXPECT_GT(v, 0.385) << n;
    EXPECT_LE(v, 0.45) << n;
  }
}

TEST(AlohaBenchmark, AveragesOverCliques) {
  EXPECT_NEAR(aloha_benchmark({3, 1}), (4.0 / 9.0 + 1.0) / 2.0, 1e-15);
  EXPECT_EQ(aloha_benchmark({}), 0.0);
}

TEST(AlohaAct, DegenerateProbabilities) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(aloha_act({0.0, ChannelRule::Single}, 1, rng), 0);
    EXPECT_EQ(aloha_act({1.0, ChannelRule::Single}, 1, rng), 1);
    const auto a = aloha_act({1.0, ChannelRule::Uniform}, 3, rng);
    EXPECT_GE(a, 1);
    EXPECT_LE(a, 3);
  }
}

TEST(AlohaAct, TransmitFrequencyWithinThreeSigma) {
  Rng rng(2);
  const double p = 0.3;
  const int slots = 100000;
  int tx = 0;
  for (int i = 0; i < slots; ++i) tx += aloha_act({p, ChannelRule::Single}, 1, rng) != 0;
  EXPECT_LE(std::abs(tx / static_cast<double>(slots) - p), 3.0 * std::sqrt(p * (1 - p) / slots));
}

TEST(AlohaSimulation, MatchesAnalyticThroughput) {
  Rng rng(3);
  const int n = 5, slots = 100000;
  const double p = 0.2;
  int success = 0;
  for (int s = 0; s < slots; ++s) {
    int tx = 0;
    for (int u = 0; u < n; ++u) tx += aloha_act({p, ChannelRule::Single}, 1, rng) != 0;
    success += tx == 1;
  }
  const double want = aloha_throughput_analytic(n, p);
  EXPECT_LE(std::abs(success / static_cast<double>(slots) - want), 4.0 * std::sqrt(want * (1 - want) / slots));
}

TEST(AlohaPolicy, Validation) {
  EXPECT_THROW((AlohaPolicy{1.2, ChannelRule::Single}.validate()), ConfigError);
  EXPECT_NO_THROW((AlohaPolicy{0.0, ChannelRule::Uniform}.validate()));
}

}  // namespace
}  // namespace dqsa
