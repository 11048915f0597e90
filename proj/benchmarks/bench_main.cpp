#include <benchmark/benchmark.h>

#include "ssmdiff/bellman_loss.hpp"
#include "ssmdiff/diffusion.hpp"
#include "ssmdiff/mdp.hpp"
#include "ssmdiff/mlp.hpp"
#include "ssmdiff/oracle.hpp"
#include "ssmdiff/replay.hpp"

namespace {

using namespace ssmdiff;

TabularMdp grid(int side, int horizon) {
  GridConfig g;
  g.width = side;
  g.height = side;
  g.p_move = 0.8;
  g.horizon = horizon;
  g.reward = goal_reward(side, side, side - 1, side - 1, 1.0, 0.0);
  return gridworld_new(g);
}

Trainer trainer_for(const TabularMdp& mdp) {
  TrainerConfig cfg;
  cfg.layout = tabular_layout(static_cast<std::size_t>(mdp.n_actions()), 8);
  cfg.n_max = mdp.horizon();
  return make_trainer(cfg, make_schedule(50, 1e-4, 0.2), {128, 128}, Activation::relu, 1, Optimizer::adam,
                      OptHyper{});
}

void BM_ForwardBatch(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const MlpParams p = mlp_init({17, 128, 128, 2}, Activation::relu, 3);
  Matrix in(rows, 17);
  Rng rng(5);
  fill_normal(rng, in.data);
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch(p, in));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_ForwardBatch)->Arg(64)->Arg(256);

void BM_Sample(benchmark::State& state) {
  const TabularMdp mdp = grid(5, 8);
  const Trainer tr = trainer_for(mdp);
  const Conditioning cond = make_conditioning(tr.cfg, encode_state(mdp, 0), encode_action(mdp, 3), 4);
  Rng rng(7);
  const auto count = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample(tr.sched, tr.online, tr.cfg.layout, cond, count, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(count));
}
BENCHMARK(BM_Sample)->Arg(256)->Arg(1024);

void BM_ExactSsm(benchmark::State& state) {
  const auto side = static_cast<int>(state.range(0));
  const TabularMdp mdp = grid(side, 16);
  const Policy pi = make_tour_policy(side, side);
  for (auto _ : state) benchmark::DoNotOptimize(exact_ssm(mdp, pi, 16));
}
BENCHMARK(BM_ExactSsm)->Arg(5)->Arg(10);

void BM_TrainStep(benchmark::State& state) {
  const TabularMdp mdp = grid(5, 8);
  const Policy pi = make_tour_policy(5, 5);
  Trainer tr = trainer_for(mdp);
  Rng rng(11);
  ReplayBuffer buf(256);
  for (std::uint64_t e = 0; e < 64; ++e) buf.push_trajectory(rollout(mdp, pi, rng, e));
  std::vector<TrainTuple> batch;
  for (int b = 0; b < 64; ++b) batch.push_back(sample_tuple(buf, mdp, rng));
  for (auto _ : state) benchmark::DoNotOptimize(train_step(tr, batch, rng));
}
BENCHMARK(BM_TrainStep);

}  // namespace
BENCHMARK_MAIN();
