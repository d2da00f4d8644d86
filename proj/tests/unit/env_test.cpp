#include <gtest/gtest.h>

#include <vector>

#include "dqsa/channel_stats.hpp"
#include "dqsa/env.hpp"
#include "dqsa/random.hpp"

namespace dqsa {
namespace {

using Acks = std::vector<std::uint8_t>;

TEST(Reset, FreshStateAtSlotZero) {
  auto env = reset(EnvConfig::single_clique(2, 1, 5));
  EXPECT_EQ(env.current_slot(), 0);
  EXPECT_EQ(env.success_counts(), (std::vector<int>{0, 0}));
  EXPECT_TRUE(env.outcome_log().empty());
}

TEST(Reset, RejectsInvalidConfigs) {
  EXPECT_THROW(reset(EnvConfig::single_clique(0, 1, 5)), ConfigError);
  EXPECT_THROW(reset(EnvConfig::single_clique(2, 0, 5)), ConfigError);
  EXPECT_THROW(reset(EnvConfig::single_clique(2, 1, 0)), ConfigError);
  auto c = EnvConfig::single_clique(2, 2, 5);
  c.capacities = {1.0, 0.0};
  EXPECT_THROW(reset(c), ConfigError);
  c.capacities = {1.0};
  EXPECT_THROW(reset(c), ConfigError);
  c = EnvConfig::single_clique(3, 1, 5);
  c.cliques = {{0, 1}, {1, 2}};
  EXPECT_THROW(reset(c), ConfigError);
  c.cliques = {{0, 1}};
  EXPECT_THROW(reset(c), ConfigError);
}

TEST(Step, LoneTransmittersSucceed) {
  auto env = reset(EnvConfig::single_clique(2, 2, 5));
  const std::vector<Action> a{1, 2};
  const auto& out = env.step(a);
  EXPECT_EQ(out.success, (Acks{1, 1}));
  EXPECT_EQ(out.ack, (Acks{1, 1}));
}

TEST(Step, SharedChannelCollides) {
  auto env = reset(EnvConfig::single_clique(2, 2, 5));
  const std::vector<Action> a{1, 1};
  const auto& out = env.step(a);
  EXPECT_EQ(out.success, (Acks{0, 0}));
  EXPECT_EQ(out.ack, (Acks{0, 0}));
}

TEST(Step, IdleSlot) {
  auto env = reset(EnvConfig::single_clique(2, 1, 5));
  const std::vector<Action> a{0, 0};
  EXPECT_EQ(env.step(a).ack, (Acks{0, 0}));
}

TEST(Step, CliquesDoNotInterfere) {
  const std::vector<int> sizes{2, 2};
  auto env = reset(EnvConfig::from_clique_sizes(sizes, 1, 5));
  const std::vector<Action> a{1, 0, 1, 0};
  EXPECT_EQ(env.step(a).success, (Acks{1, 0, 1, 0}));
  EXPECT_EQ(env.clique_of(2), 1);
}

TEST(Step, ErrorsPastHorizonAndOutOfRange) {
  auto env = reset(EnvConfig::single_clique(2, 1, 1));
  EXPECT_THROW(env.step(std::vector<Action>{2, 0}), DomainError);
  EXPECT_THROW(env.step(std::vector<Action>{-1, 0}), DomainError);
  EXPECT_THROW(env.step(std::vector<Action>{1}), DomainError);
  env.step(std::vector<Action>{1, 0});
  EXPECT_TRUE(env.done());
  EXPECT_THROW(env.step(std::vector<Action>{1, 0}), HorizonError);
}

TEST(LocalObservation, ReturnsAck) {
  const auto out = resolve_slot(std::vector<Action>{1, 2, 2, 0}, {{0, 1, 2, 3}}, 2);
  EXPECT_EQ(local_observation(out, 0), 1);
  EXPECT_EQ(local_observation(out, 1), 0);
  EXPECT_EQ(local_observation(out, 3), 0);
}

// Random slots over random topologies; checks every per-slot invariant.
TEST(Step, RandomSlotsRespectInvariants) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> sizes(static_cast<std::size_t>(uniform_int(rng, 1, 4)));
    for (int& s : sizes) s = uniform_int(rng, 1, 5);
    const int k = uniform_int(rng, 1, 3);
    auto env = reset(EnvConfig::from_clique_sizes(sizes, k, 20));
    const int n_users = env.config().num_users;
    std::vector<int> never_transmitted(static_cast<std::size_t>(n_users), 1);
    while (!env.done()) {
      std::vector<Action> a(static_cast<std::size_t>(n_users));
      for (int n = 0; n < n_users; ++n) {
        // user 0 never transmits
        a[static_cast<std::size_t>(n)] = n == 0 ? 0 : uniform_int(rng, 0, k);
        if (a[static_cast<std::size_t>(n)] != 0) never_transmitted[static_cast<std::size_t>(n)] = 0;
      }
      const auto& out = env.step(a);
      for (int n = 0; n < n_users; ++n) {
        const auto i = static_cast<std::size_t>(n);
        EXPECT_EQ(out.ack[i], out.success[i]);
        if (a[i] == 0) { EXPECT_EQ(out.success[i], 0); }
      }
      for (const auto& clique : env.cliques()) {
        std::vector<int> winners(static_cast<std::size_t>(k) + 1, 0);
        int total = 0;
        for (int n : clique)
          if (out.success[static_cast<std::size_t>(n)]) {
            ++winners[static_cast<std::size_t>(a[static_cast<std::size_t>(n)])];
            ++total;
          }
        for (int c = 1; c <= k; ++c) EXPECT_LE(winners[static_cast<std::size_t>(c)], 1);
        EXPECT_LE(total, std::min<int>(k, static_cast<int>(clique.size())));
      }
    }
    for (int n = 0; n < n_users; ++n) {
      EXPECT_LE(env.success_counts()[static_cast<std::size_t>(n)], env.current_slot());
      if (never_transmitted[static_cast<std::size_t>(n)]) { EXPECT_EQ(env.success_counts()[static_cast<std::size_t>(n)], 0); }
    }
    if (k == 1) {
      const auto st = channel_stats(env.outcome_log(), env.cliques(), 1);
      EXPECT_NEAR(st.throughput() + st.idle_fraction() + st.collision_fraction(), 1.0, 1e-12);
    }
  }
}

TEST(Step, IdenticalActionsGiveIdenticalLogs) {
  auto run = [] {
    auto env = reset(EnvConfig::single_clique(3, 2, 30, 99));
    Rng rng(5);
    while (!env.done()) {
      std::vector<Action> a(3);
      for (auto& v : a) v = uniform_int(rng, 0, 2);
      env.step(a);
    }
    return env.outcome_log();
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t s = 0; s < a.size(); ++s) {
    EXPECT_EQ(a[s].actions, b[s].actions);
    EXPECT_EQ(a[s].success, b[s].success);
  }
}

TEST(ChannelStats, ClassifiesEveryCell) {
  std::vector<SlotOutcome> log;
  const std::vector<std::vector<int>> one{{0, 1, 2}};
  log.push_back(resolve_slot(std::vector<Action>{0, 0, 0}, one, 1));
  log.push_back(resolve_slot(std::vector<Action>{1, 0, 0}, one, 1));
  log.push_back(resolve_slot(std::vector<Action>{1, 1, 0}, one, 1));
  log.push_back(resolve_slot(std::vector<Action>{0, 0, 1}, one, 1));
  const auto st = channel_stats(log, one, 1);
  EXPECT_EQ(st.cells, 4);
  EXPECT_DOUBLE_EQ(st.throughput(), 0.5);
  EXPECT_DOUBLE_EQ(st.idle_fraction(), 0.25);
  EXPECT_DOUBLE_EQ(st.collision_fraction(), 0.25);
}

}  // namespace
}  // namespace dqsa
