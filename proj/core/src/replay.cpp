#include "ssmdiff/replay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssmdiff/error.hpp"

namespace ssmdiff {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be at least 1");
}

void ReplayBuffer::push_trajectory(Trajectory traj) {
  if (traj.actions.empty() || traj.states.size() != traj.actions.size() + 1) {
    throw StateError("cannot store a malformed trajectory");
  }
  trajectories_.push_back(std::move(traj));
  while (trajectories_.size() > capacity_) trajectories_.pop_front();
}

TrainTuple make_tuple(const TabularMdp& mdp, const Trajectory& traj, int t, int k) {
  const int n = traj.remaining(t);
  if (t < 0 || n < 1) throw IndexError("time index " + std::to_string(t) + " has no remaining steps");
  if (k < 1 || k > n) throw IndexError("future offset " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  const auto ut = static_cast<std::size_t>(t);
  TrainTuple tup;
  tup.s = encode_state(mdp, traj.states[ut]);
  tup.a = encode_action(mdp, traj.actions[ut]);
  tup.s_next = encode_state(mdp, traj.states[ut + 1]);
  const ActionIndex a_next = ut + 1 < traj.actions.size() ? traj.actions[ut + 1] : traj.bootstrap_action;
  tup.a_next = encode_action(mdp, a_next);
  tup.x_state = traj.states[ut + static_cast<std::size_t>(k)];
  tup.x = encode_state(mdp, tup.x_state);
  tup.n = n;
  tup.is_l1 = k == 1;
  tup.episode_id = traj.episode_id;
  tup.time = t;
  tup.offset = k;
  return tup;
}

namespace {

const Trajectory& pick(const ReplayBuffer& buf, Rng& rng, int& t) {
  if (buf.empty()) throw StateError("cannot sample from an empty replay buffer");
  const auto idx = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(buf.size()) - 1));
  const Trajectory& traj = buf.at(idx);
  t = static_cast<int>(uniform_int(rng, 0, traj.horizon() - 1));
  return traj;
}

}  // namespace

TrainTuple sample_tuple(const ReplayBuffer& buf, const TabularMdp& mdp, Rng& rng) {
  int t = 0;
  const Trajectory& traj = pick(buf, rng, t);
  const int n = traj.remaining(t);
  const int k = static_cast<int>(uniform_int(rng, 1, n));
  return make_tuple(mdp, traj, t, k);
}

TrainTuple sample_tuple_discounted(const ReplayBuffer& buf, const TabularMdp& mdp, double gamma, Rng& rng) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("gamma must lie in (0, 1)");
  int t = 0;
  const Trajectory& traj = pick(buf, rng, t);
  const int n = traj.remaining(t);
  // Inverse CDF of the geometric law truncated to [1, n]:
  // P(k <= m) = (1 - gamma^m) / (1 - gamma^n).
  const double u = uniform01(rng);
  const double mass = 1.0 - std::pow(gamma, n);
  int k = static_cast<int>(std::ceil(std::log1p(-u * mass) / std::log(gamma)));
  k = std::clamp(k, 1, n);
  return make_tuple(mdp, traj, t, k);
}

}  // namespace ssmdiff
