#include "ssmdiff/bellman_loss.hpp"

#include <cmath>
#include <string>

#include "ssmdiff/error.hpp"

namespace ssmdiff {

std::string_view to_string(ConditionOn c) { return c == ConditionOn::current ? "current" : "next"; }
std::string_view to_string(SyncMode m) { return m == SyncMode::hard ? "hard" : "polyak"; }

ConditionOn parse_condition_on(std::string_view name) {
  if (name == "current") return ConditionOn::current;
  if (name == "next") return ConditionOn::next;
  throw ConfigError("unknown condition_on '" + std::string(name) + "' (expected current or next)");
}

SyncMode parse_sync_mode(std::string_view name) {
  if (name == "hard") return SyncMode::hard;
  if (name == "polyak") return SyncMode::polyak;
  throw ConfigError("unknown sync mode '" + std::string(name) + "' (expected hard or polyak)");
}

InputLayout tabular_layout(std::size_t n_actions, std::size_t step_dim) {
  return InputLayout{kStateEncDim, kStateEncDim, n_actions, step_dim, 1};
}

Trainer make_trainer(const TrainerConfig& cfg, NoiseSchedule sched, const std::vector<std::size_t>& hidden,
                     Activation activation, std::uint64_t seed, Optimizer optimizer, const OptHyper& hyper) {
  if (cfg.n_max < 1) throw ConfigError("n_max must be at least 1");
  if (cfg.layout.x_dim == 0) throw ConfigError("denoiser data dimension must be positive");
  if (cfg.sync.mode == SyncMode::hard && cfg.sync.period == 0) throw ConfigError("hard sync period must be >= 1");
  if (cfg.sync.mode == SyncMode::polyak && !(cfg.sync.tau >= 0.0 && cfg.sync.tau <= 1.0)) {
    throw ConfigError("polyak tau must lie in [0, 1]");
  }
  std::vector<std::size_t> sizes;
  sizes.push_back(cfg.layout.total());
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(cfg.layout.x_dim);

  Trainer tr;
  tr.cfg = cfg;
  tr.sched = std::move(sched);
  tr.online = mlp_init(sizes, activation, seed);
  tr.target = copy_params(tr.online);
  tr.opt = make_opt_state(optimizer, hyper, tr.online);
  return tr;
}

Conditioning make_conditioning(const TrainerConfig& cfg, std::span<const double> state, std::span<const double> action,
                               int n) {
  Conditioning c;
  c.state_enc.assign(state.begin(), state.end());
  c.action_enc.assign(action.begin(), action.end());
  c.horizon_enc = {static_cast<double>(n) / static_cast<double>(cfg.n_max)};
  return c;
}

Conditioning online_conditioning(const Trainer& trainer, const TrainTuple& tuple) {
  if (trainer.cfg.condition_on == ConditionOn::current) {
    return make_conditioning(trainer.cfg, tuple.s, tuple.a, tuple.n);
  }
  return make_conditioning(trainer.cfg, tuple.s_next, tuple.a_next, tuple.n);
}

Conditioning target_conditioning(const Trainer& trainer, const TrainTuple& tuple) {
  return make_conditioning(trainer.cfg, tuple.s_next, tuple.a_next, tuple.n - 1);
}

NoiseDraw draw_noise(const NoiseSchedule& sched, std::size_t dim, Rng& rng) {
  NoiseDraw d;
  d.step = static_cast<int>(uniform_int(rng, 1, sched.steps));
  d.epsilon = normal_vector(rng, dim);
  return d;
}

namespace {

struct BatchEval {
  std::vector<double> losses;
  MlpGrads grads;  // gradient of the mean loss
};

BatchEval evaluate(const Trainer& tr, std::span<const TrainTuple> batch, std::span<const NoiseDraw> draws) {
  if (batch.empty()) throw PreconditionError("training batch must not be empty");
  if (draws.size() != batch.size()) throw ShapeError("need exactly one noise draw per tuple");
  const InputLayout& layout = tr.cfg.layout;
  const std::size_t d = layout.x_dim;
  const std::size_t rows = batch.size();

  Matrix online_in(rows, layout.total());
  Matrix targets(rows, d);
  std::vector<std::size_t> l2_rows;
  std::vector<double> x_i(d);
  for (std::size_t b = 0; b < rows; ++b) {
    const TrainTuple& tup = batch[b];
    const NoiseDraw& draw = draws[b];
    check_step(tr.sched, draw.step);
    if (tup.n < 1) throw PreconditionError("tuple has no remaining steps");
    if (!tup.is_l1 && tup.n < 2) throw ContractError("bootstrap tuple needs n >= 2");
    const auto& x0 = tup.is_l1 ? tup.s_next : tup.x;
    if (x0.size() != d || draw.epsilon.size() != d) throw ShapeError("tuple state dimension does not match layout");
    forward_noise_into(tr.sched, x0, draw.step, draw.epsilon, x_i);
    const auto step_enc = encode_step(draw.step, tr.sched.steps, layout.step_dim);
    write_input_row(layout, online_in.row(b), x_i, online_conditioning(tr, tup), step_enc);
    if (tup.is_l1) {
      std::copy(draw.epsilon.begin(), draw.epsilon.end(), targets.row(b).begin());
    } else {
      l2_rows.push_back(b);
    }
  }

  if (!l2_rows.empty()) {
    Matrix target_in(l2_rows.size(), layout.total());
    for (std::size_t r = 0; r < l2_rows.size(); ++r) {
      const std::size_t b = l2_rows[r];
      const TrainTuple& tup = batch[b];
      const auto step_enc = encode_step(draws[b].step, tr.sched.steps, layout.step_dim);
      auto xi = online_in.row(b).first(d);
      write_input_row(layout, target_in.row(r), xi, target_conditioning(tr, tup), step_enc);
    }
    const Matrix tgt = predict_batch(tr.target, target_in);
    for (std::size_t r = 0; r < l2_rows.size(); ++r) {
      std::copy(tgt.row(r).begin(), tgt.row(r).end(), targets.row(l2_rows[r]).begin());
    }
  }

  BatchForward fwd = forward_batch(tr.online, online_in);
  BatchEval out;
  out.losses.resize(rows);
  Matrix out_grad(rows, d);
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t b = 0; b < rows; ++b) {
    const double eta = loss_weight(tr.sched, draws[b].step, tr.cfg.eta_mode);
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = fwd.output(b, k) - targets(b, k);
      sq += diff * diff;
      out_grad(b, k) = 2.0 * eta * diff * inv_rows;
    }
    out.losses[b] = eta * sq;
    if (!std::isfinite(out.losses[b])) {
      const TrainTuple& tup = batch[b];
      throw NumericError("non-finite loss for tuple (episode " + std::to_string(tup.episode_id) + ", t=" +
                         std::to_string(tup.time) + ", offset " + std::to_string(tup.offset) + ", n=" +
                         std::to_string(tup.n) + ", diffusion step " + std::to_string(draws[b].step) + ")");
    }
  }
  out.grads = backward_batch(tr.online, fwd.cache, out_grad);
  return out;
}

LossResult single(const Trainer& tr, const TrainTuple& tuple, int i, std::span<const double> epsilon) {
  NoiseDraw draw{i, std::vector<double>(epsilon.begin(), epsilon.end())};
  BatchEval ev = evaluate(tr, std::span(&tuple, 1), std::span(&draw, 1));
  return LossResult{ev.losses.front(), tuple.is_l1, std::move(ev.grads)};
}

}  // namespace

LossResult loss_l1(const Trainer& trainer, const TrainTuple& tuple, int i, std::span<const double> epsilon) {
  if (!tuple.is_l1) throw ContractError("loss_l1 called on a bootstrap (L2) tuple");
  return single(trainer, tuple, i, epsilon);
}

LossResult loss_l2(const Trainer& trainer, const TrainTuple& tuple, int i, std::span<const double> epsilon) {
  if (tuple.is_l1) throw ContractError("loss_l2 called on a denoising (L1) tuple");
  return single(trainer, tuple, i, epsilon);
}

LossResult compute_loss(const Trainer& trainer, const TrainTuple& tuple, Rng& rng) {
  NoiseDraw draw = draw_noise(trainer.sched, trainer.cfg.layout.x_dim, rng);
  return tuple.is_l1 ? loss_l1(trainer, tuple, draw.step, draw.epsilon)
                     : loss_l2(trainer, tuple, draw.step, draw.epsilon);
}

LossStats train_step(Trainer& trainer, std::span<const TrainTuple> batch, std::span<const NoiseDraw> draws) {
  BatchEval ev = evaluate(trainer, batch, draws);
  opt_step(trainer.online, ev.grads, trainer.opt);
  trainer.step_count += 1;
  sync_target(trainer);

  LossStats st;
  double sum = 0.0;
  double sum_l1 = 0.0;
  double sum_l2 = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    sum += ev.losses[b];
    if (batch[b].is_l1) {
      ++st.n_l1;
      sum_l1 += ev.losses[b];
    } else {
      ++st.n_l2;
      sum_l2 += ev.losses[b];
    }
  }
  st.mean_loss = sum / static_cast<double>(batch.size());
  st.mean_l1 = st.n_l1 ? sum_l1 / static_cast<double>(st.n_l1) : 0.0;
  st.mean_l2 = st.n_l2 ? sum_l2 / static_cast<double>(st.n_l2) : 0.0;
  return st;
}

LossStats train_step(Trainer& trainer, std::span<const TrainTuple> batch, Rng& rng) {
  if (batch.empty()) throw PreconditionError("training batch must not be empty");
  std::vector<NoiseDraw> draws;
  draws.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    draws.push_back(draw_noise(trainer.sched, trainer.cfg.layout.x_dim, rng));
  }
  return train_step(trainer, batch, draws);
}

void sync_target(Trainer& trainer) {
  if (trainer.cfg.sync.mode == SyncMode::hard) {
    if (trainer.step_count % trainer.cfg.sync.period == 0) trainer.target = copy_params(trainer.online);
  } else {
    polyak_update(trainer.target, trainer.online, trainer.cfg.sync.tau);
  }
}

}  // namespace ssmdiff
