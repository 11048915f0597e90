#include "ssmdiff/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ssmdiff/error.hpp"

namespace ssmdiff {

namespace {

std::pair<int, int> offset(ActionIndex a) {
  switch (a) {
    case kUp: return {0, -1};
    case kDown: return {0, 1};
    case kLeft: return {-1, 0};
    default: return {1, 0};
  }
}

ActionIndex direction(int x0, int y0, int x1, int y1) {
  if (x1 == x0 + 1 && y1 == y0) return kRight;
  if (x1 == x0 - 1 && y1 == y0) return kLeft;
  if (y1 == y0 + 1 && x1 == x0) return kDown;
  if (y1 == y0 - 1 && x1 == x0) return kUp;
  throw StateError("tour construction produced non-adjacent cells");
}

// Action that keeps (x, y) in place by pushing into the border.
ActionIndex wall_action(int w, int h, int x, int y) {
  if (y == 0) return kUp;
  if (y == h - 1) return kDown;
  if (x == 0) return kLeft;
  if (x == w - 1) return kRight;
  return kUp;
}

// Cycle over the rectangle [x0, x0 + w) x [y0, y0 + h) with h even and w >= 2:
// along the first row, serpentine back through columns 1.., return up column 0.
std::vector<std::pair<int, int>> rect_cycle(int x0, int y0, int w, int h) {
  std::vector<std::pair<int, int>> cells;
  for (int x = 0; x < w; ++x) cells.emplace_back(x, 0);
  for (int y = 1; y < h; ++y) {
    if (y % 2 == 1) {
      for (int x = w - 1; x >= 1; --x) cells.emplace_back(x, y);
    } else {
      for (int x = 1; x < w; ++x) cells.emplace_back(x, y);
    }
  }
  for (int y = h - 1; y >= 1; --y) cells.emplace_back(0, y);
  for (auto& [x, y] : cells) {
    x += x0;
    y += y0;
  }
  return cells;
}

}  // namespace

double TabularMdp::transition(StateIndex s, ActionIndex a, StateIndex next) const {
  check_state(s);
  check_action(a);
  check_state(next);
  return transition_[(static_cast<std::size_t>(s) * kNumMoves + static_cast<std::size_t>(a)) *
                         static_cast<std::size_t>(n_states()) +
                     static_cast<std::size_t>(next)];
}

std::span<const double> TabularMdp::transition_row(StateIndex s, ActionIndex a) const {
  check_state(s);
  check_action(a);
  const auto n = static_cast<std::size_t>(n_states());
  return {transition_.data() + (static_cast<std::size_t>(s) * kNumMoves + static_cast<std::size_t>(a)) * n, n};
}

double TabularMdp::reward(StateIndex s) const {
  check_state(s);
  return reward_[static_cast<std::size_t>(s)];
}

void TabularMdp::check_state(StateIndex s) const {
  if (s < 0 || s >= n_states()) {
    throw IndexError("state " + std::to_string(s) + " outside [0, " + std::to_string(n_states()) + ")");
  }
}

void TabularMdp::check_action(ActionIndex a) const {
  if (a < 0 || a >= kNumMoves) {
    throw IndexError("action " + std::to_string(a) + " outside [0, " + std::to_string(kNumMoves) + ")");
  }
}

TabularMdp gridworld_new(const GridConfig& cfg) {
  if (cfg.width < 1 || cfg.height < 1) throw ConfigError("grid width and height must be at least 1");
  if (!(cfg.p_move > 0.0 && cfg.p_move <= 1.0)) throw ConfigError("p_move must lie in (0, 1]");
  if (cfg.horizon < 1) throw ConfigError("horizon must be at least 1");
  TabularMdp m;
  m.width_ = cfg.width;
  m.height_ = cfg.height;
  m.p_move_ = cfg.p_move;
  m.horizon_ = cfg.horizon;
  const int n = cfg.width * cfg.height;
  if (cfg.reward.empty()) {
    m.reward_.assign(static_cast<std::size_t>(n), 0.0);
  } else {
    if (cfg.reward.size() != static_cast<std::size_t>(n)) throw ConfigError("reward vector must have one entry per cell");
    for (double r : cfg.reward) {
      if (!std::isfinite(r)) throw ConfigError("rewards must be finite");
    }
    m.reward_ = cfg.reward;
  }
  if (cfg.start) {
    if (*cfg.start < 0 || *cfg.start >= n) throw ConfigError("start state outside the grid");
    m.start_ = cfg.start;
  }
  m.transition_.assign(static_cast<std::size_t>(n) * kNumMoves * static_cast<std::size_t>(n), 0.0);
  for (StateIndex s = 0; s < n; ++s) {
    const int x = s % cfg.width;
    const int y = s / cfg.width;
    for (ActionIndex a = 0; a < kNumMoves; ++a) {
      auto [dx, dy] = offset(a);
      const int nx = x + dx;
      const int ny = y + dy;
      double* row = m.transition_.data() + (static_cast<std::size_t>(s) * kNumMoves + static_cast<std::size_t>(a)) *
                                               static_cast<std::size_t>(n);
      if (nx < 0 || nx >= cfg.width || ny < 0 || ny >= cfg.height) {
        row[s] = 1.0;
      } else {
        row[ny * cfg.width + nx] += cfg.p_move;
        row[s] += 1.0 - cfg.p_move;
      }
    }
  }
  return m;
}

std::vector<double> goal_reward(int width, int height, int goal_x, int goal_y, double value, double other) {
  if (goal_x < 0 || goal_x >= width || goal_y < 0 || goal_y >= height) throw ConfigError("goal cell outside the grid");
  std::vector<double> r(static_cast<std::size_t>(width * height), other);
  r[static_cast<std::size_t>(goal_y * width + goal_x)] = value;
  return r;
}

void check_policy(const TabularMdp& mdp, const Policy& policy) {
  if (policy.table.size() != static_cast<std::size_t>(mdp.n_states())) {
    throw ConfigError("policy must assign an action to every state");
  }
  for (ActionIndex a : policy.table) {
    if (a < 0 || a >= mdp.n_actions()) throw ConfigError("policy contains an invalid action index");
  }
}

Policy make_tour_policy(int width, int height) {
  if (width < 1 || height < 1) throw ConfigError("grid width and height must be at least 1");
  Policy p;
  p.table.assign(static_cast<std::size_t>(width * height), kLeft);
  auto set = [&](int x, int y, ActionIndex a) { p.table[static_cast<std::size_t>(y * width + x)] = a; };
  auto close_cycle = [&](const std::vector<std::pair<int, int>>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto [x0, y0] = cells[k];
      const auto [x1, y1] = cells[(k + 1) % cells.size()];
      set(x0, y0, direction(x0, y0, x1, y1));
    }
  };

  if (width == 1 || height == 1) {
    // A line has no cycles longer than two: pair neighbours into 2-cycles.
    const int len = std::max(width, height);
    for (int k = 0; k + 1 < len; k += 2) {
      if (width == 1) {
        set(0, k, kDown);
        set(0, k + 1, kUp);
      } else {
        set(k, 0, kRight);
        set(k + 1, 0, kLeft);
      }
    }
    if (len % 2 == 1) {
      const int last = len - 1;
      if (width == 1) {
        set(0, last, wall_action(width, height, 0, last));
      } else {
        set(last, 0, wall_action(width, height, last, 0));
      }
    }
    return p;
  }

  if (height % 2 == 0) {
    close_cycle(rect_cycle(0, 0, width, height));
    return p;
  }
  if (width % 2 == 0) {
    auto cells = rect_cycle(0, 0, height, width);
    for (auto& [x, y] : cells) std::swap(x, y);
    close_cycle(cells);
    return p;
  }

  // Both odd: corner (0, 0) stays put, the rest of row 0 pairs up, and rows
  // 1..height-1 (an even count) form one cycle.
  set(0, 0, kLeft);
  for (int x = 1; x + 1 < width; x += 2) {
    set(x, 0, kRight);
    set(x + 1, 0, kLeft);
  }
  close_cycle(rect_cycle(0, 1, width, height - 1));
  return p;
}

Policy make_toward_goal_policy(int width, int height, int goal_x, int goal_y) {
  if (goal_x < 0 || goal_x >= width || goal_y < 0 || goal_y >= height) throw ConfigError("goal cell outside the grid");
  Policy p;
  p.table.resize(static_cast<std::size_t>(width * height));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      ActionIndex a;
      if (x < goal_x) {
        a = kRight;
      } else if (x > goal_x) {
        a = kLeft;
      } else if (y < goal_y) {
        a = kDown;
      } else if (y > goal_y) {
        a = kUp;
      } else {
        a = wall_action(width, height, x, y);
      }
      p.table[static_cast<std::size_t>(y * width + x)] = a;
    }
  }
  return p;
}

Policy parse_policy_table(std::string_view text, int n_states) {
  if (text.size() != static_cast<std::size_t>(n_states)) {
    throw ConfigError("policy table needs exactly one of U/D/L/R per state (" + std::to_string(n_states) + ")");
  }
  Policy p;
  for (char c : text) {
    switch (c) {
      case 'U': p.table.push_back(kUp); break;
      case 'D': p.table.push_back(kDown); break;
      case 'L': p.table.push_back(kLeft); break;
      case 'R': p.table.push_back(kRight); break;
      default: throw ConfigError(std::string("invalid policy character '") + c + "'");
    }
  }
  return p;
}

std::string policy_table_string(const Policy& policy) {
  static constexpr char kNames[] = {'U', 'D', 'L', 'R'};
  std::string out;
  for (ActionIndex a : policy.table) out += kNames[a];
  return out;
}

StateIndex step(const TabularMdp& mdp, StateIndex s, ActionIndex a, Rng& rng) {
  auto row = mdp.transition_row(s, a);
  const double u = uniform01(rng);
  double acc = 0.0;
  StateIndex last_positive = s;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] <= 0.0) continue;
    acc += row[k];
    last_positive = static_cast<StateIndex>(k);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

Trajectory rollout(const TabularMdp& mdp, const Policy& policy, Rng& rng, std::uint64_t episode_id) {
  check_policy(mdp, policy);
  Trajectory t;
  t.episode_id = episode_id;
  StateIndex s = mdp.start() ? *mdp.start() : static_cast<StateIndex>(uniform_int(rng, 0, mdp.n_states() - 1));
  t.states.reserve(static_cast<std::size_t>(mdp.horizon()) + 1);
  t.actions.reserve(static_cast<std::size_t>(mdp.horizon()));
  t.states.push_back(s);
  for (int k = 0; k < mdp.horizon(); ++k) {
    const ActionIndex a = policy(s);
    t.actions.push_back(a);
    s = step(mdp, s, a, rng);
    t.states.push_back(s);
  }
  t.bootstrap_action = policy(s);
  return t;
}

void check_trajectory(const TabularMdp& mdp, const Trajectory& traj) {
  if (traj.actions.empty() || traj.states.size() != traj.actions.size() + 1) {
    throw StateError("trajectory must have one more state than actions and at least one action");
  }
  for (std::size_t k = 0; k < traj.actions.size(); ++k) {
    if (!(mdp.transition(traj.states[k], traj.actions[k], traj.states[k + 1]) > 0.0)) {
      throw StateError("trajectory contains an impossible transition at t=" + std::to_string(k));
    }
  }
  mdp.check_action(traj.bootstrap_action);
}

std::vector<double> encode_state(const TabularMdp& mdp, StateIndex s) {
  mdp.check_state(s);
  auto axis = [](int c, int size) { return size == 1 ? 0.0 : 2.0 * c / (size - 1) - 1.0; };
  return {axis(mdp.cell_x(s), mdp.width()), axis(mdp.cell_y(s), mdp.height())};
}

StateIndex decode_state(const TabularMdp& mdp, std::span<const double> v) {
  if (v.size() != kStateEncDim) throw ShapeError("state encoding must have two coordinates");
  if (!std::isfinite(v[0]) || !std::isfinite(v[1])) throw NumericError("cannot decode a non-finite state vector");
  auto axis = [](double u, int size) {
    if (size == 1) return 0;
    const double c = std::round((u + 1.0) * (size - 1) / 2.0);
    return static_cast<int>(std::clamp(c, 0.0, static_cast<double>(size - 1)));
  };
  return mdp.cell(axis(v[0], mdp.width()), axis(v[1], mdp.height()));
}

std::vector<double> encode_action(const TabularMdp& mdp, ActionIndex a) {
  mdp.check_action(a);
  std::vector<double> v(static_cast<std::size_t>(mdp.n_actions()), 0.0);
  v[static_cast<std::size_t>(a)] = 1.0;
  return v;
}

}  // namespace ssmdiff
