#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ssmdiff/mlp.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {

enum class BetaSpacing { linear };

// Reverse-process variance: beta uses sigma_i^2 = beta_i, posterior uses the
// forward posterior variance (1 - abar_{i-1}) / (1 - abar_i) * beta_i.
enum class SigmaMode { beta, posterior };

// Per-step loss weight. simple is the unit-weight objective; product is
// eta_i = beta_i^2 / (2 sigma_i^2) * alpha_i * (1 - abar_i).
enum class EtaMode { simple, product };

std::string_view to_string(SigmaMode m);
std::string_view to_string(EtaMode m);
SigmaMode parse_sigma_mode(std::string_view name);
EtaMode parse_eta_mode(std::string_view name);

// All per-step vectors are stored 0-based: element i - 1 belongs to step i.
struct NoiseSchedule {
  int steps = 0;
  double beta_min = 0.0;
  double beta_max = 0.0;
  SigmaMode sigma_mode = SigmaMode::beta;
  EtaMode eta_mode = EtaMode::simple;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> sigma;  // standard deviation of the reverse step noise
  std::vector<double> eta;    // weight for eta_mode

  double beta_at(int i) const { return beta[static_cast<std::size_t>(i - 1)]; }
  double alpha_at(int i) const { return alpha[static_cast<std::size_t>(i - 1)]; }
  double alpha_bar_at(int i) const { return alpha_bar[static_cast<std::size_t>(i - 1)]; }
  double sigma_at(int i) const { return sigma[static_cast<std::size_t>(i - 1)]; }
};

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max, BetaSpacing spacing = BetaSpacing::linear,
                            SigmaMode sigma_mode = SigmaMode::beta, EtaMode eta_mode = EtaMode::simple);

void check_step(const NoiseSchedule& sched, int i);

// x_i = sqrt(abar_i) x0 + sqrt(1 - abar_i) eps.
std::vector<double> forward_noise(const NoiseSchedule& sched, std::span<const double> x0, int i,
                                  std::span<const double> epsilon);
void forward_noise_into(const NoiseSchedule& sched, std::span<const double> x0, int i, std::span<const double> epsilon,
                        std::span<double> out);

double loss_weight(const NoiseSchedule& sched, int i, EtaMode mode);

// Fourier features of the diffusion step: pairs (sin, cos)(2^j * pi * i / K).
std::vector<double> encode_step(int i, int steps, std::size_t dim);

// What the denoiser sees besides the noisy point and the step embedding.
struct Conditioning {
  std::vector<double> state_enc;
  std::vector<double> action_enc;
  std::vector<double> horizon_enc;
};

// Column layout of the denoiser input: [x_i | state | action | step | horizon].
struct InputLayout {
  std::size_t x_dim = 0;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t step_dim = 0;
  std::size_t horizon_dim = 0;

  std::size_t total() const { return x_dim + state_dim + action_dim + step_dim + horizon_dim; }
  bool operator==(const InputLayout&) const = default;
};

void check_conditioning(const InputLayout& layout, const Conditioning& cond);

void write_input_row(const InputLayout& layout, std::span<double> row, std::span<const double> x_i,
                     const Conditioning& cond, std::span<const double> step_enc);

// One ancestral step: x_{i-1} = (x_i - beta_i / sqrt(1 - abar_i) * eps_theta) / sqrt(alpha_i) + sigma_i z,
// with the noise term dropped at i = 1.
std::vector<double> reverse_step(const NoiseSchedule& sched, const MlpParams& net, const InputLayout& layout,
                                 std::span<const double> x_i, int i, const Conditioning& cond,
                                 std::span<const double> z);

// Draws `count` independent x0 samples. Chains run in chunks of
// kSampleChunk; within a chunk x_K is drawn for every chain, then the z of each
// step for every chain, so the result is a pure function of the rng state.
inline constexpr std::size_t kSampleChunk = 256;

std::vector<std::vector<double>> sample(const NoiseSchedule& sched, const MlpParams& net, const InputLayout& layout,
                                        const Conditioning& cond, std::size_t count, Rng& rng);

}  // namespace ssmdiff
