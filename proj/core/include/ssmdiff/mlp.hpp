#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssmdiff/io.hpp"

namespace ssmdiff {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// Dense row-major matrix. Rows are batch items in every batched API below.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;    // out

  bool operator==(const DenseLayer&) const = default;
};

// Multi-layer perceptron: hidden layers use `activation`, the output layer is
// linear. Gradients share this type (same shapes, different meaning).
struct MlpParams {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t parameter_count() const;

  // Flat views over every parameter in serialisation order (all weights, then
  // all biases). Used by the optimiser, gradient checks and IO.
  template <typename F>
  void for_each_block(F&& f) {
    for (auto& l : layers) f(std::span<double>(l.weight));
    for (auto& l : layers) f(std::span<double>(l.bias));
  }
  template <typename F>
  void for_each_block(F&& f) const {
    for (const auto& l : layers) f(std::span<const double>(l.weight));
    for (const auto& l : layers) f(std::span<const double>(l.bias));
  }

  bool operator==(const MlpParams&) const = default;
};

using MlpGrads = MlpParams;

MlpParams mlp_init(const std::vector<std::size_t>& layer_sizes, Activation activation, std::uint64_t seed);
MlpParams zeros_like(const MlpParams& p);
bool same_shape(const MlpParams& a, const MlpParams& b);
bool all_finite(const MlpParams& p);

// Intermediate values of one (batched) forward pass. activations[0] is the
// input, activations[l + 1] the output of layer l; preacts[l] is the affine
// output of layer l before the nonlinearity.
struct ForwardCache {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> preacts;
  std::vector<Matrix> activations;

  std::size_t batch() const { return activations.empty() ? 0 : activations.front().rows; }
};

struct ForwardResult {
  std::vector<double> output;
  ForwardCache cache;
};

struct BatchForward {
  Matrix output;
  ForwardCache cache;
};

ForwardResult mlp_forward(const MlpParams& params, std::span<const double> input);
BatchForward forward_batch(const MlpParams& params, const Matrix& inputs);
// Forward pass without retaining intermediates.
Matrix predict_batch(const MlpParams& params, const Matrix& inputs);

// Gradient of sum_rows(output . output_grad) with respect to every parameter.
MlpGrads mlp_backward(const MlpParams& params, const ForwardCache& cache, std::span<const double> output_grad);
MlpGrads backward_batch(const MlpParams& params, const ForwardCache& cache, const Matrix& output_grad);

// Scalar loss of the network output: returns (loss, d loss / d output).
using OutputLoss = std::function<std::pair<double, std::vector<double>>(std::span<const double>)>;

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-12)
// with central differences of step h.
double grad_check(const MlpParams& params, std::span<const double> input, const OutputLoss& loss, double h);

enum class Optimizer { sgd, adam };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

struct OptHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptState {
  Optimizer optimizer = Optimizer::adam;
  OptHyper hyper;
  std::uint64_t step_count = 0;
  MlpParams first_moment;   // adam only; empty layers for sgd
  MlpParams second_moment;  // adam only

  bool operator==(const OptState&) const = default;
};

OptState make_opt_state(Optimizer optimizer, const OptHyper& hyper, const MlpParams& like);

// Applies one update in place. Throws NumericError, leaving params and state
// untouched, if any gradient entry is non-finite.
void opt_step(MlpParams& params, const MlpGrads& grads, OptState& state);

MlpParams copy_params(const MlpParams& src);
// target <- (1 - tau) * target + tau * online.
void polyak_update(MlpParams& target, const MlpParams& online, double tau);

// Checkpoint fragment. The header half writes `<prefix>.key=value` lines; the
// data half writes little-endian f64 weights of every layer, then biases.
void write_params_header(std::ostream& os, std::string_view prefix, const MlpParams& params);
void write_params_data(std::ostream& os, const MlpParams& params);
MlpParams params_from_header(const io::Header& header, std::string_view prefix);
void read_params_data(io::ByteReader& reader, MlpParams& params);

}  // namespace ssmdiff
