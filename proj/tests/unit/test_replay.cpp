#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "ssmdiff/error.hpp"
#include "ssmdiff/replay.hpp"
#include "test_support.hpp"

namespace ssmdiff {
namespace {

Trajectory labelled(const TabularMdp& m, const Policy& pi, Rng& rng, std::uint64_t id) { return rollout(m, pi, rng, id); }

TEST(ReplayBuffer, PushAndEvict) {
  const TabularMdp m = testing::grid(3, 3, 0.8, 4);
  const Policy pi = make_tour_policy(3, 3);
  Rng rng(1);
  ReplayBuffer buf(2);
  EXPECT_TRUE(buf.empty());
  buf.push_trajectory(labelled(m, pi, rng, 0));
  EXPECT_EQ(buf.size(), 1u);
  buf.push_trajectory(labelled(m, pi, rng, 1));
  buf.push_trajectory(labelled(m, pi, rng, 2));
  EXPECT_EQ(buf.size(), 2u);
  EXPECT_EQ(buf.at(0).episode_id, 1u);
  EXPECT_EQ(buf.at(1).episode_id, 2u);
}

TEST(ReplayBuffer, EvictedNeverSampled) {
  const TabularMdp m = testing::grid(3, 3, 0.8, 4);
  const Policy pi = make_tour_policy(3, 3);
  Rng rng(1);
  ReplayBuffer buf(3);
  for (std::uint64_t e = 0; e < 10; ++e) buf.push_trajectory(labelled(m, pi, rng, e));
  for (int k = 0; k < 5000; ++k) EXPECT_GE(sample_tuple(buf, m, rng).episode_id, 7u);
}

TEST(ReplayBuffer, ZeroCapacity) { EXPECT_THROW(ReplayBuffer(0), ConfigError); }

TEST(SampleTuple, EmptyBuffer) {
  const TabularMdp m = testing::grid(3, 3, 0.8, 4);
  ReplayBuffer buf(4);
  Rng rng(1);
  EXPECT_THROW(sample_tuple(buf, m, rng), StateError);
  EXPECT_THROW(sample_tuple_discounted(buf, m, 0.5, rng), StateError);
}

TEST(SampleTuple, HorizonOneAlwaysL1) {
  const TabularMdp m = testing::grid(3, 3, 0.8, 1);
  const Policy pi = make_tour_policy(3, 3);
  Rng rng(2);
  ReplayBuffer buf(10);
  for (std::uint64_t e = 0; e < 10; ++e) buf.push_trajectory(labelled(m, pi, rng, e));
  for (int k = 0; k < 1000; ++k) {
    const TrainTuple t = sample_tuple(buf, m, rng);
    EXPECT_EQ(t.n, 1);
    EXPECT_TRUE(t.is_l1);
    EXPECT_EQ(t.x, t.s_next);
  }
}

TEST(SampleTuple, FieldsMatchTrajectory) {
  const TabularMdp m = testing::grid(4, 4, 0.8, 6);
  const Policy pi = make_tour_policy(4, 4);
  Rng rng(3);
  ReplayBuffer buf(20);
  for (std::uint64_t e = 0; e < 20; ++e) buf.push_trajectory(labelled(m, pi, rng, e));
  for (int k = 0; k < 5000; ++k) {
    const TrainTuple tup = sample_tuple(buf, m, rng);
    const Trajectory& traj = buf.at(tup.episode_id);
    const auto ti = static_cast<std::size_t>(tup.time);
    EXPECT_EQ(tup.n, 6 - tup.time);
    ASSERT_GE(tup.offset, 1);
    ASSERT_LE(tup.offset, tup.n);
    EXPECT_EQ(tup.is_l1, tup.offset == 1);
    EXPECT_EQ(tup.s, encode_state(m, traj.states[ti]));
    EXPECT_EQ(tup.a, encode_action(m, traj.actions[ti]));
    EXPECT_EQ(tup.s_next, encode_state(m, traj.states[ti + 1]));
    const ActionIndex a_next = ti + 1 < traj.actions.size() ? traj.actions[ti + 1] : traj.bootstrap_action;
    EXPECT_EQ(tup.a_next, encode_action(m, a_next));
    EXPECT_EQ(tup.x_state, traj.states[ti + static_cast<std::size_t>(tup.offset)]);
    EXPECT_EQ(tup.x, encode_state(m, tup.x_state));
  }
}

TEST(SampleTuple, L1FractionIsOneOverN) {
  const TabularMdp m = testing::grid(5, 5, 0.8, 8);
  const Policy pi = make_tour_policy(5, 5);
  Rng rng(4);
  ReplayBuffer buf(200);
  for (std::uint64_t e = 0; e < 200; ++e) buf.push_trajectory(labelled(m, pi, rng, e));
  std::map<int, std::pair<int, int>> by_n;  // n -> (l1, total)
  for (int k = 0; k < 400000; ++k) {
    const TrainTuple t = sample_tuple(buf, m, rng);
    by_n[t.n].first += t.is_l1;
    by_n[t.n].second += 1;
  }
  ASSERT_EQ(by_n.size(), 8u);
  for (const auto& [n, c] : by_n) {
    const double p = 1.0 / n;
    EXPECT_NEAR(static_cast<double>(c.first) / c.second, p, 3.0 * std::sqrt(p * (1 - p) / c.second)) << "n=" << n;
  }
}

// Deterministic environment: the suffix after s_t is known, so x must be
// uniform over it.
TEST(SampleTuple, FutureStateUniformOverSuffix) {
  GridConfig g;
  g.width = 6;
  g.height = 1;
  g.p_move = 1.0;
  g.horizon = 5;
  g.start = 0;
  const TabularMdp m = gridworld_new(g);
  const Policy pi{{kRight, kRight, kRight, kRight, kRight, kRight}};
  Rng rng(5);
  ReplayBuffer buf(1);
  buf.push_trajectory(rollout(m, pi, rng, 0));
  std::map<std::pair<int, int>, int> counts;  // (t, x) -> count
  std::map<int, int> per_t;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    const TrainTuple tup = sample_tuple(buf, m, rng);
    ++counts[{tup.time, tup.x_state}];
    ++per_t[tup.time];
  }
  for (const auto& [t, total] : per_t) {
    const int n = 5 - t;
    for (int x = t + 1; x <= t + n; ++x) {
      const double p = 1.0 / n;
      EXPECT_NEAR(static_cast<double>(counts[{t, x}]) / total, p, 3.5 * std::sqrt(p * (1 - p) / total));
    }
    for (int x = 0; x <= t; ++x) EXPECT_EQ(counts.count({t, x}), 0u);
  }
}

TEST(SampleTupleDiscounted, SmallGammaAlwaysL1) {
  const TabularMdp m = testing::grid(3, 3, 0.8, 6);
  const Policy pi = make_tour_policy(3, 3);
  Rng rng(6);
  ReplayBuffer buf(10);
  for (std::uint64_t e = 0; e < 10; ++e) buf.push_trajectory(labelled(m, pi, rng, e));
  for (int k = 0; k < 10000; ++k) EXPECT_TRUE(sample_tuple_discounted(buf, m, 1e-12, rng).is_l1);
}

TEST(SampleTupleDiscounted, ClosedFormL1Probability) {
  const TabularMdp m = testing::grid(4, 4, 0.8, 12);
  const Policy pi = make_tour_policy(4, 4);
  Rng rng(7);
  ReplayBuffer buf(50);
  for (std::uint64_t e = 0; e < 50; ++e) buf.push_trajectory(labelled(m, pi, rng, e));
  const double gamma = 0.5;
  std::map<int, std::pair<int, int>> by_n;
  for (int k = 0; k < 300000; ++k) {
    const TrainTuple t = sample_tuple_discounted(buf, m, gamma, rng);
    ASSERT_GE(t.offset, 1);
    ASSERT_LE(t.offset, t.n);
    by_n[t.n].first += t.is_l1;
    by_n[t.n].second += 1;
  }
  for (const auto& [n, c] : by_n) {
    const double p = (1 - gamma) / (1 - std::pow(gamma, n));
    EXPECT_NEAR(static_cast<double>(c.first) / c.second, p, 3.5 * std::sqrt(p * (1 - p) / c.second) + 1e-12)
        << "n=" << n;
  }
}

TEST(SampleTupleDiscounted, InvalidGamma) {
  const TabularMdp m = testing::grid(3, 3, 0.8, 6);
  ReplayBuffer buf(1);
  Rng rng(1);
  buf.push_trajectory(rollout(m, make_tour_policy(3, 3), rng));
  EXPECT_THROW(sample_tuple_discounted(buf, m, 1.0, rng), PreconditionError);
  EXPECT_THROW(sample_tuple_discounted(buf, m, 0.0, rng), PreconditionError);
}

TEST(MakeTuple, InvalidIndices) {
  const TabularMdp m = testing::grid(3, 3, 0.8, 4);
  Rng rng(1);
  const Trajectory t = rollout(m, make_tour_policy(3, 3), rng);
  EXPECT_THROW(make_tuple(m, t, 4, 1), Error);
  EXPECT_THROW(make_tuple(m, t, 1, 4), Error);
  EXPECT_THROW(make_tuple(m, t, 1, 0), Error);
}

}  // namespace
}  // namespace ssmdiff
