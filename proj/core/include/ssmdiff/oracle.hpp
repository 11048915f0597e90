#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssmdiff/mdp.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {

// Finite-horizon successor measure d(x | s, a, n) for n in [1, n_max], stored
// densely as [s][a][n - 1][x].
struct SsmTable {
  int n_states = 0;
  int n_actions = 0;
  int n_max = 0;
  std::vector<double> d;

  std::span<const double> row(StateIndex s, ActionIndex a, int n) const;
  std::span<double> row(StateIndex s, ActionIndex a, int n);
  double at(StateIndex s, ActionIndex a, int n, StateIndex x) const { return row(s, a, n)[static_cast<std::size_t>(x)]; }
};

// d(.|s,a,1) = T(.|s,a);
// d(x|s,a,n) = sum_s' T(s'|s,a) [ (1/n) 1{s' = x} + ((n-1)/n) d(x|s',pi(s'),n-1) ].
SsmTable exact_ssm(const TabularMdp& mdp, const Policy& policy, int n_max);

// Empirical pmf of s_k with k ~ U{1..n} over `num_rollouts` rollouts that
// take `a` first and follow the policy afterwards.
std::vector<double> mc_ssm(const TabularMdp& mdp, const Policy& policy, StateIndex s, ActionIndex a, int n,
                           std::size_t num_rollouts, Rng& rng);

// q[s][a][n - 1] = sum_x d(x|s,a,n) R(x), flattened the same way as SsmTable.
struct QTable {
  int n_states = 0;
  int n_actions = 0;
  int n_max = 0;
  std::vector<double> q;

  double at(StateIndex s, ActionIndex a, int n) const;
};

QTable exact_q(const SsmTable& table, const TabularMdp& mdp);

// Discounted measure d(x|s,a) = (1 - gamma) T(x|s,a) + gamma E_{s'}[d(x|s',pi(s'))],
// solved by fixed-point iteration to max-norm change < tol. Layout [s][a][x].
std::vector<double> exact_ssm_discounted(const TabularMdp& mdp, const Policy& policy, double gamma, double tol);

}  // namespace ssmdiff
