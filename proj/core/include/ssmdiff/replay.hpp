#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "ssmdiff/mdp.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {

// One training sample: current state/action, successor and its on-policy
// action, and a future state x drawn from the same episode's suffix.
struct TrainTuple {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
  std::vector<double> a_next;
  std::vector<double> x;
  int n = 1;           // steps remaining at s
  bool is_l1 = true;   // x is the immediate successor (offset 1)

  // Provenance, for diagnostics and tests.
  std::uint64_t episode_id = 0;
  int time = 0;
  int offset = 1;
  StateIndex x_state = 0;
};

// Bounded FIFO of trajectories. Encoding happens at sampling time, so tuples
// carry vectors and the loss never sees raw indices.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push_trajectory(Trajectory traj);
  std::size_t size() const { return trajectories_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return trajectories_.empty(); }
  const Trajectory& at(std::size_t k) const { return trajectories_.at(k); }
  const std::deque<Trajectory>& trajectories() const { return trajectories_; }

 private:
  std::size_t capacity_;
  std::deque<Trajectory> trajectories_;
};

// Uniform episode, uniform t in [0, H), offset k uniform in [1, n] with
// n = H - t; is_l1 <=> k == 1, so P(is_l1 | n) = 1 / n.
TrainTuple sample_tuple(const ReplayBuffer& buf, const TabularMdp& mdp, Rng& rng);

// As sample_tuple but k ~ Geometric(1 - gamma) truncated to [1, n], giving
// P(is_l1 | n) = (1 - gamma) / (1 - gamma^n).
TrainTuple sample_tuple_discounted(const ReplayBuffer& buf, const TabularMdp& mdp, double gamma, Rng& rng);

// Builds the tuple for an explicit (episode, t, k) choice.
TrainTuple make_tuple(const TabularMdp& mdp, const Trajectory& traj, int t, int k);

}  // namespace ssmdiff
