#include "ssmdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ssmdiff/error.hpp"

namespace ssmdiff {

std::string_view to_string(SigmaMode m) { return m == SigmaMode::beta ? "beta" : "posterior"; }
std::string_view to_string(EtaMode m) { return m == EtaMode::simple ? "simple" : "product"; }

SigmaMode parse_sigma_mode(std::string_view name) {
  if (name == "beta") return SigmaMode::beta;
  if (name == "posterior") return SigmaMode::posterior;
  throw ConfigError("unknown sigma mode '" + std::string(name) + "' (expected beta or posterior)");
}

EtaMode parse_eta_mode(std::string_view name) {
  if (name == "simple") return EtaMode::simple;
  if (name == "product") return EtaMode::product;
  throw ConfigError("unknown eta mode '" + std::string(name) + "' (expected simple or product)");
}

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max, BetaSpacing spacing, SigmaMode sigma_mode,
                            EtaMode eta_mode) {
  if (steps < 1) throw ConfigError("diffusion needs at least one step (K >= 1)");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
    throw ConfigError("beta bounds must satisfy 0 < beta_min <= beta_max < 1");
  }
  (void)spacing;

  NoiseSchedule s;
  s.steps = steps;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.sigma_mode = sigma_mode;
  s.eta_mode = eta_mode;
  const auto n = static_cast<std::size_t>(steps);
  s.beta.resize(n);
  s.alpha.resize(n);
  s.alpha_bar.resize(n);
  s.sigma.resize(n);
  s.eta.resize(n);
  double running = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(steps - 1);
    s.beta[k] = beta_min + (beta_max - beta_min) * frac;
    s.alpha[k] = 1.0 - s.beta[k];
    running *= s.alpha[k];
    s.alpha_bar[k] = running;
  }
  for (std::size_t k = 0; k < n; ++k) {
    double var = s.beta[k];
    if (sigma_mode == SigmaMode::posterior) {
      const double prev = k == 0 ? 1.0 : s.alpha_bar[k - 1];
      var = (1.0 - prev) / (1.0 - s.alpha_bar[k]) * s.beta[k];
    }
    s.sigma[k] = std::sqrt(var);
  }
  for (int i = 1; i <= steps; ++i) s.eta[static_cast<std::size_t>(i - 1)] = loss_weight(s, i, eta_mode);
  return s;
}

void check_step(const NoiseSchedule& sched, int i) {
  if (i < 1 || i > sched.steps) {
    throw IndexError("diffusion step " + std::to_string(i) + " outside [1, " + std::to_string(sched.steps) + "]");
  }
}

void forward_noise_into(const NoiseSchedule& sched, std::span<const double> x0, int i, std::span<const double> epsilon,
                        std::span<double> out) {
  check_step(sched, i);
  if (epsilon.size() != x0.size() || out.size() != x0.size()) {
    throw ShapeError("forward_noise: x0 and epsilon must have the same length");
  }
  const double a = std::sqrt(sched.alpha_bar_at(i));
  const double b = std::sqrt(1.0 - sched.alpha_bar_at(i));
  for (std::size_t k = 0; k < x0.size(); ++k) out[k] = a * x0[k] + b * epsilon[k];
}

std::vector<double> forward_noise(const NoiseSchedule& sched, std::span<const double> x0, int i,
                                  std::span<const double> epsilon) {
  std::vector<double> out(x0.size());
  forward_noise_into(sched, x0, i, epsilon, out);
  return out;
}

double loss_weight(const NoiseSchedule& sched, int i, EtaMode mode) {
  check_step(sched, i);
  if (mode == EtaMode::simple) return 1.0;
  const double beta = sched.beta_at(i);
  const double var = sched.sigma_at(i) * sched.sigma_at(i);
  // Posterior variance vanishes at i = 1; fall back to beta there so the
  // weight stays finite and positive.
  const double denom = var > 0.0 ? var : beta;
  return beta * beta / (2.0 * denom) * sched.alpha_at(i) * (1.0 - sched.alpha_bar_at(i));
}

std::vector<double> encode_step(int i, int steps, std::size_t dim) {
  std::vector<double> out(dim);
  const double t = static_cast<double>(i) / static_cast<double>(steps);
  std::size_t k = 0;
  for (std::size_t j = 0; k + 1 < dim; ++j, k += 2) {
    const double w = std::ldexp(std::numbers::pi, static_cast<int>(j));
    out[k] = std::sin(w * t);
    out[k + 1] = std::cos(w * t);
  }
  if (k < dim) out[k] = t;
  return out;
}

void check_conditioning(const InputLayout& layout, const Conditioning& cond) {
  if (cond.state_enc.size() != layout.state_dim || cond.action_enc.size() != layout.action_dim ||
      cond.horizon_enc.size() != layout.horizon_dim) {
    throw ShapeError("conditioning vector sizes do not match the denoiser input layout");
  }
}

void write_input_row(const InputLayout& layout, std::span<double> row, std::span<const double> x_i,
                     const Conditioning& cond, std::span<const double> step_enc) {
  if (row.size() != layout.total() || x_i.size() != layout.x_dim || step_enc.size() != layout.step_dim) {
    throw ShapeError("denoiser input row has inconsistent dimensions");
  }
  check_conditioning(layout, cond);
  auto out = row.begin();
  out = std::copy(x_i.begin(), x_i.end(), out);
  out = std::copy(cond.state_enc.begin(), cond.state_enc.end(), out);
  out = std::copy(cond.action_enc.begin(), cond.action_enc.end(), out);
  out = std::copy(step_enc.begin(), step_enc.end(), out);
  std::copy(cond.horizon_enc.begin(), cond.horizon_enc.end(), out);
}

namespace {

void check_net(const MlpParams& net, const InputLayout& layout) {
  if (net.input_dim() != layout.total() || net.output_dim() != layout.x_dim) {
    throw ShapeError("denoiser network shape does not match the input layout");
  }
}

void apply_reverse(const NoiseSchedule& sched, int i, std::span<const double> x_i, std::span<const double> eps,
                   std::span<const double> z, std::span<double> out) {
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(i));
  const double coef = sched.beta_at(i) / std::sqrt(1.0 - sched.alpha_bar_at(i));
  const double sigma = i > 1 ? sched.sigma_at(i) : 0.0;
  for (std::size_t k = 0; k < x_i.size(); ++k) {
    out[k] = inv_sqrt_alpha * (x_i[k] - coef * eps[k]);
    if (sigma > 0.0) out[k] += sigma * z[k];
  }
}

}  // namespace

std::vector<double> reverse_step(const NoiseSchedule& sched, const MlpParams& net, const InputLayout& layout,
                                 std::span<const double> x_i, int i, const Conditioning& cond,
                                 std::span<const double> z) {
  check_step(sched, i);
  check_net(net, layout);
  if (x_i.size() != layout.x_dim || z.size() != layout.x_dim) {
    throw ShapeError("reverse_step: x_i and z must match the data dimension");
  }
  Matrix in(1, layout.total());
  const auto step_enc = encode_step(i, sched.steps, layout.step_dim);
  write_input_row(layout, in.row(0), x_i, cond, step_enc);
  const Matrix eps = predict_batch(net, in);
  std::vector<double> out(x_i.size());
  apply_reverse(sched, i, x_i, eps.row(0), z, out);
  return out;
}

std::vector<std::vector<double>> sample(const NoiseSchedule& sched, const MlpParams& net, const InputLayout& layout,
                                        const Conditioning& cond, std::size_t count, Rng& rng) {
  if (count == 0) throw PreconditionError("sample count must be at least 1");
  check_net(net, layout);
  check_conditioning(layout, cond);
  const std::size_t d = layout.x_dim;

  // Conditioning columns are constant across a chunk; write them once.
  Matrix in(kSampleChunk, layout.total());
  std::vector<double> zero_x(d, 0.0);
  const auto first_enc = encode_step(sched.steps, sched.steps, layout.step_dim);
  for (std::size_t r = 0; r < kSampleChunk; ++r) write_input_row(layout, in.row(r), zero_x, cond, first_enc);
  const std::size_t step_col = layout.x_dim + layout.state_dim + layout.action_dim;

  std::vector<std::vector<double>> result;
  result.reserve(count);
  Matrix x;
  Matrix z;
  std::vector<double> next(d);
  for (std::size_t begin = 0; begin < count; begin += kSampleChunk) {
    const std::size_t rows = std::min(kSampleChunk, count - begin);
    x = Matrix(rows, d);
    fill_normal(rng, x.data);
    in.rows = rows;
    in.data.resize(rows * in.cols);
    for (int i = sched.steps; i >= 1; --i) {
      const auto step_enc = encode_step(i, sched.steps, layout.step_dim);
      for (std::size_t r = 0; r < rows; ++r) {
        auto row = in.row(r);
        std::copy(x.row(r).begin(), x.row(r).end(), row.begin());
        std::copy(step_enc.begin(), step_enc.end(), row.begin() + static_cast<std::ptrdiff_t>(step_col));
      }
      const Matrix eps = predict_batch(net, in);
      z = Matrix(rows, d);
      if (i > 1) fill_normal(rng, z.data);
      for (std::size_t r = 0; r < rows; ++r) {
        apply_reverse(sched, i, x.row(r), eps.row(r), z.row(r), next);
        for (std::size_t k = 0; k < d; ++k) {
          if (!std::isfinite(next[k])) {
            throw NumericError("non-finite value in reverse diffusion at step " + std::to_string(i));
          }
        }
        std::copy(next.begin(), next.end(), x.row(r).begin());
      }
    }
    for (std::size_t r = 0; r < rows; ++r) result.emplace_back(x.row(r).begin(), x.row(r).end());
  }
  return result;
}

}  // namespace ssmdiff
