#include "ssmdiff/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Core>
#include <utility>

#include "ssmdiff/error.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {

namespace {

constexpr int kParamsFormatVersion = 1;

void check_input_shape(const MlpParams& params, std::size_t cols) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (cols != params.input_dim()) {
    throw ShapeError("input has dimension " + std::to_string(cols) + ", network expects " +
                     std::to_string(params.input_dim()));
  }
}

void check_cache(const MlpParams& params, const ForwardCache& cache) {
  if (cache.layer_sizes != params.layer_sizes || cache.activations.size() != params.layers.size() + 1 ||
      cache.preacts.size() != params.layers.size()) {
    throw ShapeError("forward cache does not belong to this network");
  }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap view(const Matrix& m) { return ConstMatMap(m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)); }
MatMap view(Matrix& m) { return MatMap(m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)); }
ConstMatMap weight_view(const DenseLayer& l) {
  return ConstMatMap(l.weight.data(), static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
}

// Products run on Eigen-owned copies: their storage is always fully aligned,
// so the kernel's summation order, and hence every bit of the result, does not
// depend on where the caller's vectors happen to live.
RowMat aligned(const ConstMatMap& m) { return RowMat(m); }

void store(const RowMat& m, Matrix& out) {
  out = Matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  view(out) = m;
}

// out = in * W^T + b for every row.
void affine(const DenseLayer& layer, const Matrix& in, Matrix& out) {
  const RowMat x = aligned(view(in));
  const RowMat w = aligned(weight_view(layer));
  RowMat y(x.rows(), w.rows());
  y.noalias() = x * w.transpose();
  y.rowwise() += Eigen::RowVectorXd(ConstVecMap(layer.bias.data(), static_cast<Eigen::Index>(layer.out)));
  store(y, out);
}

void activate(Activation act, const Matrix& pre, Matrix& post) {
  post = pre;
  if (act == Activation::relu) {
    for (double& v : post.data) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : post.data) v = std::tanh(v);
  }
}

template <typename Params, typename F>
void zip_blocks(Params& a, const MlpParams& b, F&& f) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) f(std::span(a.layers[l].weight), std::span(b.layers[l].weight));
  for (std::size_t l = 0; l < a.layers.size(); ++l) f(std::span(a.layers[l].bias), std::span(b.layers[l].bias));
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu or tanh)");
}

std::string_view to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

MlpParams mlp_init(const std::vector<std::size_t>& layer_sizes, Activation activation, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ConfigError("an MLP needs at least an input and an output layer size");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ConfigError("layer sizes must be positive");
  }
  Rng rng(seed);
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.activation = activation;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    DenseLayer layer;
    layer.in = layer_sizes[l];
    layer.out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    layer.weight.resize(layer.in * layer.out);
    for (double& w : layer.weight) w = dist(rng);
    layer.bias.assign(layer.out, 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z = p;
  z.for_each_block([](std::span<double> b) { std::fill(b.begin(), b.end(), 0.0); });
  return z;
}

bool same_shape(const MlpParams& a, const MlpParams& b) {
  if (a.layer_sizes != b.layer_sizes || a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].weight.size() != b.layers[l].weight.size() ||
        a.layers[l].bias.size() != b.layers[l].bias.size()) {
      return false;
    }
  }
  return true;
}

bool all_finite(const MlpParams& p) {
  bool ok = true;
  p.for_each_block([&](std::span<const double> b) {
    for (double v : b) ok = ok && std::isfinite(v);
  });
  return ok;
}

BatchForward forward_batch(const MlpParams& params, const Matrix& inputs) {
  check_input_shape(params, inputs.cols);
  BatchForward res;
  ForwardCache& cache = res.cache;
  cache.layer_sizes = params.layer_sizes;
  cache.activations.reserve(params.layers.size() + 1);
  cache.preacts.resize(params.layers.size());
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    affine(params.layers[l], cache.activations.back(), cache.preacts[l]);
    if (l + 1 < params.layers.size()) {
      Matrix post;
      activate(params.activation, cache.preacts[l], post);
      cache.activations.push_back(std::move(post));
    } else {
      cache.activations.push_back(cache.preacts[l]);
    }
  }
  res.output = cache.activations.back();
  return res;
}

Matrix predict_batch(const MlpParams& params, const Matrix& inputs) {
  check_input_shape(params, inputs.cols);
  Matrix cur = inputs;
  Matrix next;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    affine(params.layers[l], cur, next);
    if (l + 1 < params.layers.size()) {
      if (params.activation == Activation::relu) {
        for (double& v : next.data) v = v > 0.0 ? v : 0.0;
      } else {
        for (double& v : next.data) v = std::tanh(v);
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

ForwardResult mlp_forward(const MlpParams& params, std::span<const double> input) {
  Matrix in(1, input.size());
  std::copy(input.begin(), input.end(), in.data.begin());
  BatchForward bf = forward_batch(params, in);
  return {std::move(bf.output.data), std::move(bf.cache)};
}

MlpGrads backward_batch(const MlpParams& params, const ForwardCache& cache, const Matrix& output_grad) {
  check_cache(params, cache);
  if (output_grad.cols != params.output_dim() || output_grad.rows != cache.batch()) {
    throw ShapeError("output gradient shape does not match the forward pass");
  }
  MlpGrads grads = zeros_like(params);
  Matrix delta = output_grad;
  RowMat d;
  RowMat product;
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const DenseLayer& layer = params.layers[li];
    DenseLayer& g = grads.layers[li];
    const Matrix& in = cache.activations[li];
    const std::size_t n_in = layer.in;
    const std::size_t n_out = layer.out;
    d = aligned(view(std::as_const(delta)));
    product.noalias() = d.transpose() * aligned(view(in));
    MatMap(g.weight.data(), static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n_in)) = product;
    const Eigen::RowVectorXd bias_grad = d.colwise().sum();
    Eigen::Map<Eigen::RowVectorXd>(g.bias.data(), static_cast<Eigen::Index>(n_out)) = bias_grad;
    if (li == 0) break;
    product.noalias() = d * aligned(weight_view(layer));
    Matrix prev;
    store(product, prev);
    const Matrix& pre = cache.preacts[li - 1];
    const Matrix& post = cache.activations[li];
    if (params.activation == Activation::relu) {
      for (std::size_t e = 0; e < prev.data.size(); ++e) {
        if (!(pre.data[e] > 0.0)) prev.data[e] = 0.0;
      }
    } else {
      for (std::size_t e = 0; e < prev.data.size(); ++e) prev.data[e] *= 1.0 - post.data[e] * post.data[e];
    }
    delta = std::move(prev);
  }
  return grads;
}

MlpGrads mlp_backward(const MlpParams& params, const ForwardCache& cache, std::span<const double> output_grad) {
  check_cache(params, cache);
  if (cache.batch() != 1) throw ShapeError("mlp_backward expects a single-input forward cache");
  Matrix g(1, output_grad.size());
  std::copy(output_grad.begin(), output_grad.end(), g.data.begin());
  return backward_batch(params, cache, g);
}

double grad_check(const MlpParams& params, std::span<const double> input, const OutputLoss& loss, double h) {
  if (!(h > 0.0)) throw PreconditionError("grad_check step h must be positive");
  ForwardResult fr = mlp_forward(params, input);
  auto [value, dout] = loss(fr.output);
  (void)value;
  if (dout.size() != params.output_dim()) throw ShapeError("loss gradient has the wrong dimension");
  const MlpGrads analytic = mlp_backward(params, fr.cache, dout);

  MlpParams probe = params;
  auto eval = [&]() { return loss(mlp_forward(probe, input).output).first; };

  std::vector<std::span<double>> probe_blocks;
  std::vector<std::span<const double>> analytic_blocks;
  probe.for_each_block([&](std::span<double> b) { probe_blocks.push_back(b); });
  analytic.for_each_block([&](std::span<const double> b) { analytic_blocks.push_back(b); });

  double worst = 0.0;
  for (std::size_t blk = 0; blk < probe_blocks.size(); ++blk) {
    for (std::size_t k = 0; k < probe_blocks[blk].size(); ++k) {
      double& theta = probe_blocks[blk][k];
      const double saved = theta;
      theta = saved + h;
      const double up = eval();
      theta = saved - h;
      const double down = eval();
      theta = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic_blocks[blk][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

OptState make_opt_state(Optimizer optimizer, const OptHyper& hyper, const MlpParams& like) {
  if (!(hyper.learning_rate > 0.0) || !std::isfinite(hyper.learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  OptState s;
  s.optimizer = optimizer;
  s.hyper = hyper;
  if (optimizer == Optimizer::adam) {
    if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0) || !(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0) ||
        !(hyper.epsilon > 0.0)) {
      throw ConfigError("adam hyperparameters out of range");
    }
    s.first_moment = zeros_like(like);
    s.second_moment = zeros_like(like);
  }
  return s;
}

void opt_step(MlpParams& params, const MlpGrads& grads, OptState& state) {
  if (!same_shape(params, grads)) throw ShapeError("gradient shape does not match parameters");
  if (state.optimizer == Optimizer::adam &&
      (!same_shape(params, state.first_moment) || !same_shape(params, state.second_moment))) {
    throw ShapeError("optimizer accumulators do not match parameters");
  }
  if (!all_finite(grads)) throw NumericError("non-finite gradient entry; optimizer step rejected");

  state.step_count += 1;
  const double lr = state.hyper.learning_rate;
  if (state.optimizer == Optimizer::sgd) {
    zip_blocks(params, grads, [&](std::span<double> p, std::span<const double> g) {
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
    });
    return;
  }

  const double b1 = state.hyper.beta1;
  const double b2 = state.hyper.beta2;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  const double eps = state.hyper.epsilon;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = b1 * m[k] + (1.0 - b1) * g[k];
        v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
        const double mhat = m[k] / c1;
        const double vhat = v[k] / c2;
        p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    };
    update(params.layers[l].weight, grads.layers[l].weight, state.first_moment.layers[l].weight,
           state.second_moment.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.first_moment.layers[l].bias,
           state.second_moment.layers[l].bias);
  }
}

MlpParams copy_params(const MlpParams& src) { return src; }

void polyak_update(MlpParams& target, const MlpParams& online, double tau) {
  if (!same_shape(target, online)) throw ShapeError("polyak update between differently shaped networks");
  if (!(tau >= 0.0 && tau <= 1.0)) throw PreconditionError("polyak tau must lie in [0, 1]");
  if (tau == 1.0) {
    target = online;
    return;
  }
  if (tau == 0.0) return;
  zip_blocks(target, online, [&](std::span<double> t, std::span<const double> o) {
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = (1.0 - tau) * t[k] + tau * o[k];
  });
}

void write_params_header(std::ostream& os, std::string_view prefix, const MlpParams& params) {
  os << prefix << ".format_version=" << kParamsFormatVersion << '\n';
  os << prefix << ".layer_sizes=" << io::join_sizes(params.layer_sizes) << '\n';
  os << prefix << ".activation=" << to_string(params.activation) << '\n';
}

void write_params_data(std::ostream& os, const MlpParams& params) {
  params.for_each_block([&](std::span<const double> b) { io::write_f64_block(os, b); });
}

MlpParams params_from_header(const io::Header& header, std::string_view prefix) {
  const std::string p(prefix);
  const std::string& version = io::header_get(header, p + ".format_version");
  if (version != std::to_string(kParamsFormatVersion)) {
    throw FormatError("unsupported parameter format version '" + version + "' for " + p);
  }
  auto sizes = io::split_sizes(io::header_get(header, p + ".layer_sizes"));
  Activation act;
  try {
    act = parse_activation(io::header_get(header, p + ".activation"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  try {
    return zeros_like(mlp_init(sizes, act, 0));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid layer sizes for ") + p + ": " + e.what());
  }
}

void read_params_data(io::ByteReader& reader, MlpParams& params) {
  params.for_each_block([&](std::span<double> b) { reader.read_f64_block(b); });
}

}  // namespace ssmdiff
