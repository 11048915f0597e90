#include <bit>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ssmdiff/error.hpp"
#include "ssmdiff/io.hpp"
#include "ssmdiff/mlp.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {
namespace {

MlpParams affine_1x1(double w, double b) {
  MlpParams p = mlp_init({1, 1}, Activation::relu, 0);
  p.layers[0].weight = {w};
  p.layers[0].bias = {b};
  return p;
}

OutputLoss quadratic(std::vector<double> target) {
  return [target](std::span<const double> out) {
    double l = 0.0;
    std::vector<double> g(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      l += (out[k] - target[k]) * (out[k] - target[k]);
      g[k] = 2.0 * (out[k] - target[k]);
    }
    return std::pair{l, g};
  };
}

TEST(MlpInit, SameSeedBitIdentical) {
  EXPECT_EQ(mlp_init({2, 1}, Activation::relu, 7), mlp_init({2, 1}, Activation::relu, 7));
  EXPECT_NE(mlp_init({2, 1}, Activation::relu, 7), mlp_init({2, 1}, Activation::relu, 8));
}

TEST(MlpInit, Shapes) {
  const MlpParams p = mlp_init({3, 4, 2}, Activation::tanh, 1);
  ASSERT_EQ(p.layers.size(), 2u);
  EXPECT_EQ(p.layers[0].weight.size(), 12u);
  EXPECT_EQ(p.layers[0].out, 4u);
  EXPECT_EQ(p.layers[0].in, 3u);
  EXPECT_EQ(p.layers[1].weight.size(), 8u);
  EXPECT_EQ(p.layers[0].bias.size(), 4u);
  EXPECT_EQ(p.layers[1].bias.size(), 2u);
  for (double b : p.layers[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(MlpInit, WeightsWithinFanInBound) {
  const MlpParams p = mlp_init({16, 8}, Activation::relu, 3);
  for (double w : p.layers[0].weight) EXPECT_LE(std::abs(w), 0.25);
}

TEST(MlpInit, InvalidSizes) {
  EXPECT_THROW(mlp_init({2}, Activation::relu, 0), ConfigError);
  EXPECT_THROW(mlp_init({}, Activation::relu, 0), ConfigError);
  EXPECT_THROW(mlp_init({2, 0, 1}, Activation::relu, 0), ConfigError);
}

TEST(MlpForward, ZeroParamsGiveZeroOutput) {
  const MlpParams z = zeros_like(mlp_init({3, 5, 2}, Activation::relu, 1));
  const auto r = mlp_forward(z, std::vector<double>{1.0, -2.0, 3.0});
  EXPECT_EQ(r.output, (std::vector<double>{0.0, 0.0}));
}

TEST(MlpForward, AffineMap) {
  const auto r = mlp_forward(affine_1x1(2.0, 1.0), std::vector<double>{3.0});
  ASSERT_EQ(r.output.size(), 1u);
  EXPECT_DOUBLE_EQ(r.output[0], 7.0);
}

TEST(MlpForward, TanhOddSymmetry) {
  MlpParams p = mlp_init({2, 3, 2}, Activation::tanh, 5);
  for (auto& l : p.layers) std::fill(l.bias.begin(), l.bias.end(), 0.0);
  const std::vector<double> x{0.3, -0.7};
  const std::vector<double> mx{-0.3, 0.7};
  const auto a = mlp_forward(p, x).output;
  const auto b = mlp_forward(p, mx).output;
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], -b[k], 1e-15);
}

TEST(MlpForward, DimensionMismatch) {
  const MlpParams p = mlp_init({3, 2}, Activation::relu, 1);
  EXPECT_THROW(mlp_forward(p, std::vector<double>{1.0}), ShapeError);
}

TEST(MlpForward, BatchMatchesSingle) {
  const MlpParams p = mlp_init({3, 6, 2}, Activation::relu, 2);
  Matrix in(4, 3);
  Rng rng(1);
  fill_normal(rng, in.data);
  const Matrix out = predict_batch(p, in);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto single = mlp_forward(p, in.row(r)).output;
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(out(r, k), single[k], 1e-14);
  }
}

TEST(MlpBackward, ZeroOutputGrad) {
  const MlpParams p = mlp_init({3, 4, 2}, Activation::relu, 1);
  const auto r = mlp_forward(p, std::vector<double>{0.1, 0.2, 0.3});
  const MlpGrads g = mlp_backward(p, r.cache, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(g, zeros_like(p));
}

TEST(MlpBackward, AffineOuterProduct) {
  MlpParams p = mlp_init({3, 2}, Activation::relu, 4);
  const std::vector<double> x{1.0, -2.0, 0.5};
  const std::vector<double> og{3.0, -1.0};
  const auto r = mlp_forward(p, x);
  const MlpGrads g = mlp_backward(p, r.cache, og);
  for (std::size_t o = 0; o < 2; ++o) {
    EXPECT_DOUBLE_EQ(g.layers[0].bias[o], og[o]);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(g.layers[0].weight[o * 3 + k], og[o] * x[k]);
  }
}

TEST(MlpBackward, MismatchedCache) {
  const MlpParams p = mlp_init({3, 4, 2}, Activation::relu, 1);
  const MlpParams q = mlp_init({3, 5, 2}, Activation::relu, 1);
  const auto r = mlp_forward(q, std::vector<double>{0.1, 0.2, 0.3});
  EXPECT_THROW(mlp_backward(p, r.cache, std::vector<double>{1.0, 1.0}), ShapeError);
  const auto r2 = mlp_forward(p, std::vector<double>{0.1, 0.2, 0.3});
  EXPECT_THROW(mlp_backward(p, r2.cache, std::vector<double>{1.0}), ShapeError);
}

TEST(GradCheck, LinearNetQuadraticLoss) {
  const MlpParams p = mlp_init({4, 3}, Activation::relu, 9);
  EXPECT_LT(grad_check(p, std::vector<double>{0.5, -1.0, 2.0, 0.1}, quadratic({1.0, 0.0, -1.0}), 1e-5), 1e-7);
}

TEST(GradCheck, ReluTwoHiddenLayers) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const MlpParams p = mlp_init({5, 16, 16, 2}, Activation::relu, 100 + trial);
    const auto x = normal_vector(rng, 5);
    EXPECT_LT(grad_check(p, x, quadratic({0.3, -0.2}), 1e-5), 1e-4) << "trial " << trial;
  }
}

TEST(GradCheck, TanhSmooth) {
  Rng rng(4);
  const MlpParams p = mlp_init({5, 8, 8, 3}, Activation::tanh, 11);
  EXPECT_LT(grad_check(p, normal_vector(rng, 5), quadratic({0.1, 0.2, 0.3}), 1e-5), 1e-6);
}

TEST(GradCheck, NonPositiveStep) {
  const MlpParams p = mlp_init({2, 1}, Activation::relu, 1);
  EXPECT_THROW(grad_check(p, std::vector<double>{1.0, 1.0}, quadratic({0.0}), 0.0), PreconditionError);
}

TEST(OptStep, Sgd) {
  MlpParams p = affine_1x1(1.0, 0.0);
  MlpGrads g = zeros_like(p);
  g.layers[0].weight = {2.0};
  OptState st = make_opt_state(Optimizer::sgd, OptHyper{0.1}, p);
  opt_step(p, g, st);
  EXPECT_DOUBLE_EQ(p.layers[0].weight[0], 0.8);
  EXPECT_EQ(st.step_count, 1u);
}

TEST(OptStep, AdamFirstStepMagnitudeIsLearningRate) {
  for (double scale : {1e-3, 1.0, 1e3}) {
    MlpParams p = affine_1x1(1.0, 0.0);
    MlpGrads g = zeros_like(p);
    g.layers[0].weight = {scale};
    OptState st = make_opt_state(Optimizer::adam, OptHyper{0.01}, p);
    opt_step(p, g, st);
    // m_hat = g, v_hat = g^2: update = lr * g / (|g| + eps)
    EXPECT_NEAR(1.0 - p.layers[0].weight[0], 0.01 * scale / (scale + 1e-8), 1e-12);
  }
}

TEST(OptStep, ZeroGradientIsNoOp) {
  for (Optimizer o : {Optimizer::sgd, Optimizer::adam}) {
    MlpParams p = mlp_init({3, 4, 2}, Activation::relu, 1);
    const MlpParams before = p;
    OptState st = make_opt_state(o, OptHyper{}, p);
    opt_step(p, zeros_like(p), st);
    EXPECT_EQ(p, before);
    EXPECT_EQ(st.step_count, 1u);
  }
}

TEST(OptStep, NonFiniteGradientRejectedWithoutMutation) {
  MlpParams p = mlp_init({2, 2}, Activation::relu, 1);
  const MlpParams before = p;
  MlpGrads g = zeros_like(p);
  g.layers[0].bias[1] = std::nan("");
  OptState st = make_opt_state(Optimizer::adam, OptHyper{}, p);
  EXPECT_THROW(opt_step(p, g, st), NumericError);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step_count, 0u);
}

TEST(OptStep, ShapeMismatch) {
  MlpParams p = mlp_init({2, 2}, Activation::relu, 1);
  OptState st = make_opt_state(Optimizer::sgd, OptHyper{}, p);
  EXPECT_THROW(opt_step(p, zeros_like(mlp_init({2, 3}, Activation::relu, 1)), st), ShapeError);
}

TEST(Polyak, Endpoints) {
  const MlpParams online = mlp_init({3, 2}, Activation::relu, 1);
  const MlpParams orig = mlp_init({3, 2}, Activation::relu, 2);
  MlpParams t = orig;
  polyak_update(t, online, 0.0);
  EXPECT_EQ(t, orig);
  polyak_update(t, online, 1.0);
  EXPECT_EQ(t, online);
  EXPECT_EQ(copy_params(online), online);
}

TEST(Polyak, Midpoint) {
  MlpParams t = affine_1x1(0.0, 0.0);
  polyak_update(t, affine_1x1(2.0, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(t.layers[0].weight[0], 1.0);
}

TEST(Polyak, ShapeMismatch) {
  MlpParams t = mlp_init({3, 2}, Activation::relu, 1);
  EXPECT_THROW(polyak_update(t, mlp_init({3, 3}, Activation::relu, 1), 0.5), ShapeError);
}

TEST(MlpSerialization, RoundTripIsBitExact) {
  const MlpParams p = mlp_init({3, 5, 2}, Activation::tanh, 8);
  std::ostringstream head;
  write_params_header(head, "net", p);
  std::ostringstream data;
  write_params_data(data, p);
  const std::string bytes = "magic\n" + head.str() + "end_header\n" + data.str();
  const io::HeaderSplit split = io::parse_header(bytes, "magic");
  MlpParams q = params_from_header(split.header, "net");
  io::ByteReader reader(bytes, split.data_offset);
  read_params_data(reader, q);
  EXPECT_EQ(p, q);
  EXPECT_EQ(reader.remaining(), 0u);
}

TEST(MlpSerialization, WeightsThenBiasesLittleEndian) {
  MlpParams p = mlp_init({1, 1, 1}, Activation::relu, 0);
  p.layers[0].weight = {1.0};
  p.layers[1].weight = {2.0};
  p.layers[0].bias = {3.0};
  p.layers[1].bias = {4.0};
  std::ostringstream data;
  write_params_data(data, p);
  const std::string s = data.str();
  ASSERT_EQ(s.size(), 32u);
  for (int k = 0; k < 4; ++k) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(8 * k + b)]);
    EXPECT_EQ(std::bit_cast<double>(bits), static_cast<double>(k + 1));
  }
}

}  // namespace
}  // namespace ssmdiff
