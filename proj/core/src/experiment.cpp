#include "ssmdiff/experiment.hpp"

#include <cmath>
#include <numbers>

#include "ssmdiff/error.hpp"

namespace ssmdiff {

TabularMdp build_mdp(const EnvConfig& env) {
  if (env.kind != "gridworld") throw UnsupportedError("environment kind '" + env.kind + "' is not supported");
  GridConfig g;
  g.width = env.width;
  g.height = env.height;
  g.p_move = env.p_move;
  g.horizon = env.horizon;
  g.reward = goal_reward(env.width, env.height, env.goal_x, env.goal_y, env.goal_value, env.other_value);
  if (env.start) g.start = env.start->second * env.width + env.start->first;
  return gridworld_new(g);
}

Policy build_policy(const EnvConfig& env, const TabularMdp& mdp) {
  Policy p;
  if (env.policy == "tour") {
    p = make_tour_policy(mdp.width(), mdp.height());
  } else if (env.policy == "toward_goal") {
    p = make_toward_goal_policy(mdp.width(), mdp.height(), env.goal_x, env.goal_y);
  } else if (env.policy.rfind("table:", 0) == 0) {
    p = parse_policy_table(env.policy.substr(6), mdp.n_states());
  } else {
    throw ConfigError("unknown policy '" + env.policy + "'");
  }
  check_policy(mdp, p);
  return p;
}

NoiseSchedule build_schedule(const DiffusionConfig& d) {
  return make_schedule(d.steps, d.beta_min, d.beta_max, BetaSpacing::linear, d.sigma_mode, d.eta_mode);
}

TrainerConfig build_trainer_config(const ExperimentConfig& cfg, const TabularMdp& mdp) {
  TrainerConfig tc;
  tc.layout = tabular_layout(static_cast<std::size_t>(mdp.n_actions()), cfg.model.step_embed_dim);
  tc.n_max = mdp.horizon();
  tc.condition_on = cfg.training.condition_on;
  tc.sync = cfg.training.sync;
  tc.eta_mode = cfg.diffusion.eta_mode;
  return tc;
}

Experiment make_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  ex.cfg = cfg;
  ex.digest = config_digest(cfg);
  ex.mdp = build_mdp(cfg.env);
  ex.policy = build_policy(cfg.env, ex.mdp);
  ex.buffer = ReplayBuffer(cfg.training.buffer_capacity);
  const TrainingConfig& t = cfg.training;
  OptHyper hyper{t.learning_rate, t.adam_beta1, t.adam_beta2, t.adam_epsilon};
  ex.trainer = make_trainer(build_trainer_config(cfg, ex.mdp), build_schedule(cfg.diffusion), cfg.model.hidden_sizes,
                            cfg.model.activation, t.seed, t.optimizer, hyper);
  // Separate stream from the weight initialisation, same seed.
  ex.rng.seed(t.seed ^ 0x9e3779b97f4a7c15ULL);
  collect_episodes(ex, t.initial_episodes);
  return ex;
}

void collect_episodes(Experiment& ex, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) ex.buffer.push_trajectory(rollout(ex.mdp, ex.policy, ex.rng, ex.next_episode++));
}

double learning_rate_at(const TrainingConfig& t, std::uint64_t step) {
  if (t.lr_schedule == LrSchedule::constant || t.steps == 0) return t.learning_rate;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(t.steps));
  return t.lr_final + 0.5 * (t.learning_rate - t.lr_final) * (1.0 + std::cos(std::numbers::pi * frac));
}

LossStats advance(Experiment& ex) {
  const TrainingConfig& t = ex.cfg.training;
  const std::uint64_t step = ex.trainer.step_count;
  if (step > 0 && step % t.collect_every == 0) collect_episodes(ex, t.episodes_per_collect);
  ex.trainer.opt.hyper.learning_rate = learning_rate_at(t, step);

  std::vector<TrainTuple> batch;
  batch.reserve(t.batch_size);
  for (std::size_t b = 0; b < t.batch_size; ++b) {
    if (t.offset_sampling == OffsetSampling::uniform) {
      batch.push_back(sample_tuple(ex.buffer, ex.mdp, ex.rng));
    } else {
      batch.push_back(sample_tuple_discounted(ex.buffer, ex.mdp, t.gamma, ex.rng));
    }
  }
  return train_step(ex.trainer, batch, ex.rng);
}

}  // namespace ssmdiff
