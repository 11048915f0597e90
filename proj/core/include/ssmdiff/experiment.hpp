#pragma once

#include <cstdint>
#include <string>

#include "ssmdiff/bellman_loss.hpp"
#include "ssmdiff/config.hpp"
#include "ssmdiff/mdp.hpp"
#include "ssmdiff/replay.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {

// All mutable state of a training run. One rng drives collection, tuple
// sampling and noise draws in a fixed order, so (config, seed) determines the
// run completely.
struct Experiment {
  ExperimentConfig cfg;
  std::string digest;
  TabularMdp mdp;
  Policy policy;
  ReplayBuffer buffer{1};
  Trainer trainer;
  Rng rng;
  std::uint64_t next_episode = 0;
};

TabularMdp build_mdp(const EnvConfig& env);
Policy build_policy(const EnvConfig& env, const TabularMdp& mdp);
NoiseSchedule build_schedule(const DiffusionConfig& d);
TrainerConfig build_trainer_config(const ExperimentConfig& cfg, const TabularMdp& mdp);

// Initialises networks and fills the buffer with the initial episodes.
Experiment make_experiment(const ExperimentConfig& cfg);

void collect_episodes(Experiment& ex, std::size_t count);
double learning_rate_at(const TrainingConfig& t, std::uint64_t step);

// One optimisation step: periodic collection, batch sampling, train_step.
LossStats advance(Experiment& ex);

}  // namespace ssmdiff
