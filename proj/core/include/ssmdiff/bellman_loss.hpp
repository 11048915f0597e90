#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ssmdiff/diffusion.hpp"
#include "ssmdiff/mlp.hpp"
#include "ssmdiff/replay.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {

// Which state-action the online denoiser is conditioned on.
//   current: (s, a, n), the target at (s', a', n - 1). The fixed point of the
//            resulting regression is the finite-horizon successor measure.
//   next:    (s', a', n) for the online net as well; kept for experiments.
enum class ConditionOn { current, next };

enum class SyncMode { hard, polyak };

std::string_view to_string(ConditionOn c);
std::string_view to_string(SyncMode m);
ConditionOn parse_condition_on(std::string_view name);
SyncMode parse_sync_mode(std::string_view name);

struct SyncConfig {
  SyncMode mode = SyncMode::hard;
  std::uint64_t period = 500;  // hard: copy when step_count % period == 0
  double tau = 0.005;          // polyak: applied after every step
};

struct TrainerConfig {
  InputLayout layout;
  int n_max = 1;  // horizon encoding is n / n_max
  ConditionOn condition_on = ConditionOn::current;
  SyncConfig sync;
  EtaMode eta_mode = EtaMode::simple;
};

struct Trainer {
  TrainerConfig cfg;
  NoiseSchedule sched;
  MlpParams online;
  MlpParams target;
  OptState opt;
  std::uint64_t step_count = 0;
};

// Standard layout for a tabular MDP: 2-d state, one-hot action, scalar horizon.
InputLayout tabular_layout(std::size_t n_actions, std::size_t step_dim);

Trainer make_trainer(const TrainerConfig& cfg, NoiseSchedule sched, const std::vector<std::size_t>& hidden,
                     Activation activation, std::uint64_t seed, Optimizer optimizer, const OptHyper& hyper);

Conditioning make_conditioning(const TrainerConfig& cfg, std::span<const double> state, std::span<const double> action,
                               int n);
Conditioning online_conditioning(const Trainer& trainer, const TrainTuple& tuple);
// Conditioning of the bootstrap target: successor state-action, one step less.
Conditioning target_conditioning(const Trainer& trainer, const TrainTuple& tuple);

struct NoiseDraw {
  int step = 1;
  std::vector<double> epsilon;
};

NoiseDraw draw_noise(const NoiseSchedule& sched, std::size_t dim, Rng& rng);

struct LossResult {
  double loss = 0.0;
  bool is_l1 = true;
  MlpGrads grads;  // with respect to the online network only
};

// Denoising term: regress eps_theta onto the true noise of the noised successor.
LossResult loss_l1(const Trainer& trainer, const TrainTuple& tuple, int i, std::span<const double> epsilon);
// Bootstrap term: regress eps_theta onto the frozen target's prediction at the
// noised future state. No gradient flows into the target.
LossResult loss_l2(const Trainer& trainer, const TrainTuple& tuple, int i, std::span<const double> epsilon);
// Draws i ~ U{1..K} and eps ~ N(0, I), then dispatches on tuple.is_l1.
LossResult compute_loss(const Trainer& trainer, const TrainTuple& tuple, Rng& rng);

struct LossStats {
  double mean_loss = 0.0;
  std::size_t n_l1 = 0;
  std::size_t n_l2 = 0;
  double mean_l1 = 0.0;  // 0 when the batch had no L1 tuples
  double mean_l2 = 0.0;
};

// Mean loss over the batch, one optimiser step, then target synchronisation.
LossStats train_step(Trainer& trainer, std::span<const TrainTuple> batch, Rng& rng);
LossStats train_step(Trainer& trainer, std::span<const TrainTuple> batch, std::span<const NoiseDraw> draws);

void sync_target(Trainer& trainer);

}  // namespace ssmdiff
