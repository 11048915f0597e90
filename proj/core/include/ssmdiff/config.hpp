#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "ssmdiff/bellman_loss.hpp"
#include "ssmdiff/diffusion.hpp"
#include "ssmdiff/mdp.hpp"
#include "ssmdiff/mlp.hpp"

namespace ssmdiff {

struct EnvConfig {
  std::string kind = "gridworld";  // "point_mass" is recognised but unsupported
  int width = 5;
  int height = 5;
  double p_move = 0.8;
  int horizon = 8;
  int goal_x = 0;
  int goal_y = 0;
  double goal_value = 1.0;
  double other_value = 0.0;
  std::optional<std::pair<int, int>> start;  // nullopt: uniform
  std::string policy = "tour";                // tour | toward_goal | table:<U/D/L/R per state>
};

struct DiffusionConfig {
  int steps = 32;
  double beta_min = 1e-4;
  double beta_max = 0.2;
  EtaMode eta_mode = EtaMode::simple;
  SigmaMode sigma_mode = SigmaMode::beta;
};

struct ModelConfig {
  std::vector<std::size_t> hidden_sizes{128, 128};
  Activation activation = Activation::relu;
  std::size_t step_embed_dim = 8;
};

enum class OffsetSampling { uniform, geometric };
enum class LrSchedule { constant, cosine };

struct TrainingConfig {
  std::uint64_t steps = 0;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  LrSchedule lr_schedule = LrSchedule::constant;
  double lr_final = 0.0;  // cosine floor
  Optimizer optimizer = Optimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  SyncConfig sync;
  ConditionOn condition_on = ConditionOn::current;
  OffsetSampling offset_sampling = OffsetSampling::uniform;
  double gamma = 0.9;  // geometric only
  std::uint64_t seed = 0;
  std::size_t buffer_capacity = 1000;
  std::size_t initial_episodes = 100;
  std::uint64_t collect_every = 100;
  std::size_t episodes_per_collect = 10;
  std::uint64_t log_every = 100;
  std::uint64_t checkpoint_every = 0;  // 0: final checkpoint only
};

struct EvalConfig {
  std::size_t num_samples = 10000;
  // Empty: default set. Otherwise explicit (s, a, n) triples.
  std::vector<std::tuple<int, int, int>> eval_set;
  std::uint64_t seed = 0;
  bool heatmaps = true;
};

struct ExperimentConfig {
  EnvConfig env;
  DiffusionConfig diffusion;
  ModelConfig model;
  TrainingConfig training;
  EvalConfig eval;
};

// Strict parse: unknown keys and missing required keys are ConfigErrors that
// name the offending key path (e.g. "training.batch_size").
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);

// Canonical JSON with every field spelled out (defaults included).
std::string to_json(const ExperimentConfig& cfg);

// Digest of everything that determines the trained model (env, diffusion,
// model, training). The eval section is excluded so evaluation settings can
// change without invalidating checkpoints.
std::string config_digest(const ExperimentConfig& cfg);

std::string_view to_string(OffsetSampling o);
std::string_view to_string(LrSchedule s);

}  // namespace ssmdiff
