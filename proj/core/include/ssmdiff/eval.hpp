#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ssmdiff/bellman_loss.hpp"
#include "ssmdiff/mdp.hpp"
#include "ssmdiff/oracle.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {

using Pmf = std::vector<double>;

struct EvalCondition {
  StateIndex s = 0;
  ActionIndex a = 0;
  int n = 1;
  bool operator==(const EvalCondition&) const = default;
};

// Produces `count` encoded-state samples of d(.|s, a, n).
using ConditionalSampler = std::function<std::vector<std::vector<double>>(const EvalCondition&, std::size_t, Rng&)>;

ConditionalSampler diffusion_sampler(const Trainer& trainer, const TabularMdp& mdp);
// Control sampler: exact pmf rows drawn by inverse CDF, returned as cell centres.
ConditionalSampler oracle_sampler(const SsmTable& table, const TabularMdp& mdp);

Pmf empirical_pmf(const std::vector<std::vector<double>>& samples, const TabularMdp& mdp);
double tv_distance(std::span<const double> p, std::span<const double> q);

// All (s, pi(s)) at n in {1, n_max / 2, n_max} (duplicates removed).
std::vector<EvalCondition> default_eval_set(const TabularMdp& mdp, const Policy& policy, int n_max);

struct ConditionMetrics {
  EvalCondition cond;
  std::size_t samples = 0;
  double tv = 0.0;
  double q_hat = 0.0;
  double q_stderr = 0.0;
  double q_exact = 0.0;
  double q_abs_error = 0.0;
  Pmf learned;
  Pmf oracle;
};

struct MetricsReport {
  std::vector<ConditionMetrics> rows;
  double mean_tv = 0.0;
  double max_tv = 0.0;
  double mean_q_error = 0.0;
  double max_q_error = 0.0;
  std::map<int, double> mean_tv_by_n;
  std::size_t samples_per_condition = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

MetricsReport eval_model(const ConditionalSampler& sampler, const TabularMdp& mdp, const SsmTable& oracle,
                         const std::vector<EvalCondition>& eval_set, std::size_t num_samples, std::uint64_t seed);
MetricsReport eval_model(const Trainer& trainer, const TabularMdp& mdp, const SsmTable& oracle,
                         const std::vector<EvalCondition>& eval_set, std::size_t num_samples, std::uint64_t seed);

struct QEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

// Monte Carlo E_{x ~ d(.|s,a,n)}[R(x)] over decoded samples with its standard error.
QEstimate q_estimate(const ConditionalSampler& sampler, const TabularMdp& mdp, const EvalCondition& cond,
                     std::size_t num_samples, Rng& rng);
QEstimate q_estimate(const Trainer& trainer, const TabularMdp& mdp, StateIndex s, ActionIndex a, int n,
                     std::size_t num_samples, Rng& rng);

// Outputs. Every file carries the config digest.
std::string metrics_jsonl(const MetricsReport& report);
std::string metrics_csv(const MetricsReport& report);
// Binary P6 image: learned pmf (left) next to the oracle pmf (right).
std::string heatmap_ppm(const TabularMdp& mdp, std::span<const double> learned, std::span<const double> oracle,
                        const std::string& config_digest, int cell_px = 16);

}  // namespace ssmdiff
