#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssmdiff/rng.hpp"

namespace ssmdiff {

using StateIndex = int;
using ActionIndex = int;

// Grid moves. "up" decreases the row index so row 0 is drawn at the top.
enum Move : ActionIndex { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kNumMoves = 4;

struct GridConfig {
  int width = 1;
  int height = 1;
  double p_move = 1.0;  // probability the move succeeds; otherwise the agent stays
  int horizon = 1;
  std::vector<double> reward;          // per state; empty means all zero
  std::optional<StateIndex> start;     // nullopt: uniform over states
};

class TabularMdp {
 public:
  int width() const { return width_; }
  int height() const { return height_; }
  int n_states() const { return width_ * height_; }
  int n_actions() const { return kNumMoves; }
  int horizon() const { return horizon_; }
  double p_move() const { return p_move_; }
  const std::optional<StateIndex>& start() const { return start_; }

  double transition(StateIndex s, ActionIndex a, StateIndex next) const;
  std::span<const double> transition_row(StateIndex s, ActionIndex a) const;
  double reward(StateIndex s) const;
  const std::vector<double>& rewards() const { return reward_; }

  StateIndex cell(int x, int y) const { return y * width_ + x; }
  int cell_x(StateIndex s) const { return s % width_; }
  int cell_y(StateIndex s) const { return s / width_; }

  void check_state(StateIndex s) const;
  void check_action(ActionIndex a) const;

  friend TabularMdp gridworld_new(const GridConfig& cfg);

 private:
  int width_ = 1;
  int height_ = 1;
  double p_move_ = 1.0;
  int horizon_ = 1;
  std::optional<StateIndex> start_;
  std::vector<double> transition_;  // [s][a][next]
  std::vector<double> reward_;
};

TabularMdp gridworld_new(const GridConfig& cfg);

// Reward of `value` on one cell, `other` elsewhere.
std::vector<double> goal_reward(int width, int height, int goal_x, int goal_y, double value, double other);

// A deterministic tabular policy.
struct Policy {
  std::vector<ActionIndex> table;

  ActionIndex operator()(StateIndex s) const { return table.at(static_cast<std::size_t>(s)); }
  bool operator==(const Policy&) const = default;
};

void check_policy(const TabularMdp& mdp, const Policy& policy);

// Permutation policy: every cell lies on a cycle of the move graph, except a
// single corner that pushes into the wall when width and height are both odd.
// Under lazy dynamics the uniform state distribution is invariant, so every
// cell is visited at every time step.
Policy make_tour_policy(int width, int height);

// Greedy: close the column gap first, then the row gap; push into a wall at
// the goal itself.
Policy make_toward_goal_policy(int width, int height, int goal_x, int goal_y);

// One character per state in row-major order: U, D, L, R.
Policy parse_policy_table(std::string_view text, int n_states);
std::string policy_table_string(const Policy& policy);

struct Trajectory {
  std::uint64_t episode_id = 0;
  std::vector<StateIndex> states;    // s_0 .. s_H
  std::vector<ActionIndex> actions;  // a_0 .. a_{H-1}
  ActionIndex bootstrap_action = 0;  // policy action at s_H

  int horizon() const { return static_cast<int>(actions.size()); }
  int remaining(int t) const { return horizon() - t; }
  bool operator==(const Trajectory&) const = default;
};

StateIndex step(const TabularMdp& mdp, StateIndex s, ActionIndex a, Rng& rng);
Trajectory rollout(const TabularMdp& mdp, const Policy& policy, Rng& rng, std::uint64_t episode_id = 0);
void check_trajectory(const TabularMdp& mdp, const Trajectory& traj);

// Cell (x, y) maps to normalised coordinates in [-1, 1]^2; a 1-wide axis maps
// to 0. decode rounds to the nearest cell centre and clamps into the grid.
std::vector<double> encode_state(const TabularMdp& mdp, StateIndex s);
StateIndex decode_state(const TabularMdp& mdp, std::span<const double> v);
std::vector<double> encode_action(const TabularMdp& mdp, ActionIndex a);

inline constexpr std::size_t kStateEncDim = 2;

}  // namespace ssmdiff
