#include "ssmdiff/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ssmdiff/error.hpp"

namespace ssmdiff {

namespace {

std::size_t row_offset(int n_actions, int n_max, int n_states, StateIndex s, ActionIndex a, int n) {
  return ((static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)) *
              static_cast<std::size_t>(n_max) +
          static_cast<std::size_t>(n - 1)) *
         static_cast<std::size_t>(n_states);
}

}  // namespace

std::span<const double> SsmTable::row(StateIndex s, ActionIndex a, int n) const {
  if (s < 0 || s >= n_states || a < 0 || a >= n_actions || n < 1 || n > n_max) {
    throw IndexError("SSM table index out of range");
  }
  return {d.data() + row_offset(n_actions, n_max, n_states, s, a, n), static_cast<std::size_t>(n_states)};
}

std::span<double> SsmTable::row(StateIndex s, ActionIndex a, int n) {
  auto r = std::as_const(*this).row(s, a, n);
  return {const_cast<double*>(r.data()), r.size()};
}

double QTable::at(StateIndex s, ActionIndex a, int n) const {
  if (s < 0 || s >= n_states || a < 0 || a >= n_actions || n < 1 || n > n_max) {
    throw IndexError("Q table index out of range");
  }
  return q[(static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)) *
               static_cast<std::size_t>(n_max) +
           static_cast<std::size_t>(n - 1)];
}

SsmTable exact_ssm(const TabularMdp& mdp, const Policy& policy, int n_max) {
  if (n_max < 1) throw PreconditionError("n_max must be at least 1");
  check_policy(mdp, policy);
  SsmTable t;
  t.n_states = mdp.n_states();
  t.n_actions = mdp.n_actions();
  t.n_max = n_max;
  t.d.assign(static_cast<std::size_t>(t.n_states) * static_cast<std::size_t>(t.n_actions) *
                 static_cast<std::size_t>(n_max) * static_cast<std::size_t>(t.n_states),
             0.0);
  const int S = t.n_states;
  for (StateIndex s = 0; s < S; ++s) {
    for (ActionIndex a = 0; a < t.n_actions; ++a) {
      auto src = mdp.transition_row(s, a);
      auto dst = t.row(s, a, 1);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  for (int n = 2; n <= n_max; ++n) {
    const double w_now = 1.0 / n;
    const double w_later = static_cast<double>(n - 1) / n;
    for (StateIndex s = 0; s < S; ++s) {
      for (ActionIndex a = 0; a < t.n_actions; ++a) {
        auto dst = t.row(s, a, n);
        auto trans = mdp.transition_row(s, a);
        for (StateIndex sp = 0; sp < S; ++sp) {
          const double p = trans[static_cast<std::size_t>(sp)];
          if (p == 0.0) continue;
          dst[static_cast<std::size_t>(sp)] += p * w_now;
          auto later = t.row(sp, policy(sp), n - 1);
          for (StateIndex x = 0; x < S; ++x) dst[static_cast<std::size_t>(x)] += p * w_later * later[static_cast<std::size_t>(x)];
        }
      }
    }
  }
  return t;
}

std::vector<double> mc_ssm(const TabularMdp& mdp, const Policy& policy, StateIndex s, ActionIndex a, int n,
                           std::size_t num_rollouts, Rng& rng) {
  if (num_rollouts == 0) throw PreconditionError("mc_ssm needs at least one rollout");
  if (n < 1 || n > mdp.horizon()) throw PreconditionError("mc_ssm horizon must lie in [1, H]");
  check_policy(mdp, policy);
  mdp.check_state(s);
  mdp.check_action(a);
  std::vector<double> counts(static_cast<std::size_t>(mdp.n_states()), 0.0);
  for (std::size_t r = 0; r < num_rollouts; ++r) {
    const int k = static_cast<int>(uniform_int(rng, 1, n));
    StateIndex cur = s;
    ActionIndex act = a;
    for (int step_no = 1; step_no <= k; ++step_no) {
      cur = step(mdp, cur, act, rng);
      act = policy(cur);
    }
    counts[static_cast<std::size_t>(cur)] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(num_rollouts);
  return counts;
}

QTable exact_q(const SsmTable& table, const TabularMdp& mdp) {
  if (table.n_states != mdp.n_states() || table.n_actions != mdp.n_actions()) {
    throw ShapeError("SSM table does not match the MDP");
  }
  QTable q;
  q.n_states = table.n_states;
  q.n_actions = table.n_actions;
  q.n_max = table.n_max;
  q.q.resize(static_cast<std::size_t>(q.n_states) * static_cast<std::size_t>(q.n_actions) *
             static_cast<std::size_t>(q.n_max));
  std::size_t k = 0;
  for (StateIndex s = 0; s < q.n_states; ++s) {
    for (ActionIndex a = 0; a < q.n_actions; ++a) {
      for (int n = 1; n <= q.n_max; ++n) {
        auto r = table.row(s, a, n);
        double v = 0.0;
        for (StateIndex x = 0; x < q.n_states; ++x) v += r[static_cast<std::size_t>(x)] * mdp.reward(x);
        q.q[k++] = v;
      }
    }
  }
  return q;
}

std::vector<double> exact_ssm_discounted(const TabularMdp& mdp, const Policy& policy, double gamma, double tol) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("gamma must lie in (0, 1)");
  if (!(tol > 0.0)) throw PreconditionError("tolerance must be positive");
  check_policy(mdp, policy);
  const auto S = static_cast<std::size_t>(mdp.n_states());
  const auto A = static_cast<std::size_t>(mdp.n_actions());
  std::vector<double> d(S * A * S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      auto tr = mdp.transition_row(static_cast<StateIndex>(s), static_cast<ActionIndex>(a));
      std::copy(tr.begin(), tr.end(), d.begin() + static_cast<std::ptrdiff_t>((s * A + a) * S));
    }
  }
  std::vector<double> next(d.size());
  while (true) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        double* dst = next.data() + (s * A + a) * S;
        auto tr = mdp.transition_row(static_cast<StateIndex>(s), static_cast<ActionIndex>(a));
        for (std::size_t sp = 0; sp < S; ++sp) {
          const double p = tr[sp];
          if (p == 0.0) continue;
          dst[sp] += (1.0 - gamma) * p;
          const auto ap = static_cast<std::size_t>(policy(static_cast<StateIndex>(sp)));
          const double* later = d.data() + (sp * A + ap) * S;
          for (std::size_t x = 0; x < S; ++x) dst[x] += gamma * p * later[x];
        }
      }
    }
    double change = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) change = std::max(change, std::abs(next[k] - d[k]));
    d.swap(next);
    if (change < tol) break;
  }
  return d;
}

}  // namespace ssmdiff
