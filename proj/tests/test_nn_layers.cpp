#include <gtest/gtest.h>

#include <cmath>

#include "mofill/error.hpp"
#include "mofill/gradcheck.hpp"
#include "mofill/kernels.hpp"
#include "mofill/layers.hpp"
#include "test_util.hpp"

using namespace mofill;
using test::random_tensor;
using test::random_vector;

namespace {

constexpr double kEps = 1e-6;
constexpr double kTol = 1e-4;

GradCheckOptions opts(std::uint64_t seed, std::size_t max_entries = 0) {
  GradCheckOptions o;
  o.seed = seed;
  o.max_entries = max_entries;
  return o;
}

}  // namespace

class ConvGrad : public ::testing::TestWithParam<int> {};

TEST_P(ConvGrad, InputWeightsAndBias) {
  const int stride = GetParam();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ConvSpec spec{3, 2, stride, stride};
    const auto x = random_tensor<double>({2, 2, 7, 9}, seed);
    const auto w = random_tensor<double>({3, 2, 3, 3}, seed + 10);
    const auto b = random_vector<double>(3, seed + 20);

    DifferentiableOp wrt_x{
        [&](const TensorD& in) { return conv2d_forward<double>(in, spec, w, b); },
        [&](const TensorD& in, const TensorD& g) { return conv2d_backward<double>(g, in, spec, w).input; }};
    EXPECT_LT(finite_difference_check(wrt_x, x, kEps, opts(seed)).max_rel_error, kTol);

    DifferentiableOp wrt_w{
        [&](const TensorD& ww) { return conv2d_forward<double>(x, spec, ww, b); },
        [&](const TensorD& ww, const TensorD& g) { return conv2d_backward<double>(g, x, spec, ww).weights; }};
    EXPECT_LT(finite_difference_check(wrt_w, w, kEps, opts(seed)).max_rel_error, kTol);

    TensorD bt(1, 1, 1, 3);
    std::copy(b.begin(), b.end(), bt.data());
    DifferentiableOp wrt_b{
        [&](const TensorD& bb) {
          return conv2d_forward<double>(x, spec, w, std::vector<double>(bb.data(), bb.data() + 3));
        },
        [&](const TensorD&, const TensorD& g) {
          const auto gr = conv2d_backward<double>(g, x, spec, w);
          TensorD out(1, 1, 1, 3);
          std::copy(gr.bias.begin(), gr.bias.end(), out.data());
          return out;
        }};
    EXPECT_LT(finite_difference_check(wrt_b, bt, kEps, opts(seed)).max_rel_error, kTol);
  }
}

INSTANTIATE_TEST_SUITE_P(Strides, ConvGrad, ::testing::Values(1, 2));

TEST(ConvTransposeGrad, InputAndWeights) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ConvSpec spec{2, 3, 2, 2};
    const Size2 target{7, 9};
    const auto x = random_tensor<double>({2, 3, 4, 5}, seed);
    const auto w = random_tensor<double>({3, 2, 3, 3}, seed + 10);
    const auto b = random_vector<double>(2, seed + 20);
    DifferentiableOp wrt_x{
        [&](const TensorD& in) { return convtranspose2d_forward<double>(in, spec, w, b, target); },
        [&](const TensorD& in, const TensorD& g) {
          return convtranspose2d_backward<double>(g, in, spec, w).input;
        }};
    EXPECT_LT(finite_difference_check(wrt_x, x, kEps, opts(seed)).max_rel_error, kTol);
    DifferentiableOp wrt_w{
        [&](const TensorD& ww) { return convtranspose2d_forward<double>(x, spec, ww, b, target); },
        [&](const TensorD& ww, const TensorD& g) {
          return convtranspose2d_backward<double>(g, x, spec, ww).weights;
        }};
    EXPECT_LT(finite_difference_check(wrt_w, w, kEps, opts(seed)).max_rel_error, kTol);
  }
}

TEST(MaxPoolGrad, RoutesToTheArgmax) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // distinct values keep the max away from ties, where it is not differentiable
    const auto x = random_tensor<double>({1, 2, 5, 7}, seed);
    DifferentiableOp op{
        [](const TensorD& in) { return maxpool2d_forward<double>(in).output; },
        [](const TensorD& in, const TensorD& g) {
          return maxpool2d_backward<double>(g, maxpool2d_forward<double>(in).index);
        }};
    EXPECT_LT(finite_difference_check(op, x, kEps, opts(seed)).max_rel_error, kTol);
  }
}

TEST(LeakyReluGrad, AwayFromZero) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto x = random_tensor<double>({1, 2, 4, 6}, seed);
    for (double& v : x.values())
      if (std::fabs(v) < 0.01) v = 0.5;
    DifferentiableOp op{
        [](const TensorD& in) { return leaky_relu_forward(in, 0.2); },
        [](const TensorD& in, const TensorD& g) { return leaky_relu_backward(g, in, 0.2); }};
    EXPECT_LT(finite_difference_check(op, x, kEps, opts(seed)).max_rel_error, kTol);
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  const auto x = random_tensor<double>({1, 1, 3, 3}, 1);
  DifferentiableOp op{[](const TensorD& in) { return leaky_relu_forward(in, 0.2); },
                      [](const TensorD& in, const TensorD& g) {
                        auto r = leaky_relu_backward(g, in, 0.2);
                        r[0] *= 1.5;
                        return r;
                      }};
  EXPECT_GT(finite_difference_check(op, x, kEps, opts(1)).max_rel_error, 0.1);
}

TEST(GradCheck, ShrinksTheStepAcrossAKink) {
  TensorD x(1, 1, 1, 2);
  x[0] = 3e-7;  // within one step of the leaky-ReLU kink
  x[1] = -0.4;
  DifferentiableOp op{[](const TensorD& in) { return leaky_relu_forward(in, 0.2); },
                      [](const TensorD& in, const TensorD& g) { return leaky_relu_backward(g, in, 0.2); }};
  GradCheckOptions o = opts(1);
  o.max_refinements = 0;
  EXPECT_GT(finite_difference_check(op, x, kEps, o).max_rel_error, 0.1);
  const GradCheckResult r = finite_difference_check(op, x, kEps, opts(1));
  EXPECT_LT(r.max_rel_error, kTol);
  EXPECT_EQ(r.refined, 1u);
}

TEST(Xavier, BoundAndDeterminism) {
  const Shape4 s{8, 4, 3, 3};
  const double bound = std::sqrt(6.0 / (4 * 9 + 8 * 9));
  EXPECT_DOUBLE_EQ(xavier_bound(s), bound);
  const auto w = xavier_init<float>(s, 7);
  double mx = 0.0;
  for (float v : w.values()) mx = std::max(mx, std::fabs(static_cast<double>(v)));
  EXPECT_LE(mx, bound);
  EXPECT_GT(mx, 0.8 * bound);
  EXPECT_EQ(w, xavier_init<float>(s, 7));
  EXPECT_NE(w, xavier_init<float>(s, 8));
}

TEST(Adam, MatchesHandComputedSteps) {
  LayerParams<double> p("l", TensorD(1, 1, 1, 2), {0.0});
  p.weights[0] = 1.0;
  p.weights[1] = -1.0;
  LayerGrads<double> g(p);
  g.weights[0] = 0.5;
  g.weights[1] = -2.0;
  g.bias[0] = 1.0;
  OptimConfig cfg;
  double m = 0, v = 0, w = 1.0;
  for (int t = 1; t <= 3; ++t) {
    adam_step(p, g, cfg);
    m = 0.9 * m + 0.1 * 0.5;
    v = 0.999 * v + 0.001 * 0.25;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p.weights[0], w, 1e-12);
  }
  EXPECT_EQ(p.step, 3);
  // first step moves every parameter by ~lr against its gradient sign
  EXPECT_NEAR(p.bias[0], -3e-3, 1e-8);
}

TEST(Adam, RejectsNonFiniteGradientNamingTheLayer) {
  LayerParams<float> p("enc3.conv2", Tensor4<float>(1, 1, 1, 2), {0.0f});
  LayerGrads<float> g(p);
  g.weights[1] = NAN;
  try {
    adam_step(p, g, OptimConfig{});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("enc3.conv2"), std::string::npos);
  }
}

TEST(Adam, ConfigValidation) {
  OptimConfig c;
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Stack, ForwardBackwardGradient) {
  // conv(s2) -> lrelu -> pool -> deconv back to the recorded size
  std::vector<LayerParams<double>> params;
  params.emplace_back("a", random_tensor<double>({3, 1, 3, 3}, 1), random_vector<double>(3, 2));
  params.emplace_back("b", random_tensor<double>({3, 2, 3, 3}, 3), random_vector<double>(2, 4));
  const std::vector<Block> blocks{Block::conv(0, 2), Block::leaky_relu(0.2), Block::max_pool(),
                                  Block::conv_transpose(1, 1)};
  const auto x = random_tensor<double>({1, 1, 9, 11}, 5);
  DifferentiableOp op{
      [&](const TensorD& in) {
        std::vector<Size2> sizes;
        return stack_forward<double>(blocks, params, in, sizes, nullptr);
      },
      [&](const TensorD& in, const TensorD& g) {
        std::vector<Size2> sizes;
        StackCache<double> cache;
        stack_forward<double>(blocks, params, in, sizes, &cache);
        std::vector<LayerGrads<double>> grads{LayerGrads<double>(params[0]), LayerGrads<double>(params[1])};
        return stack_backward<double>(blocks, params, cache, g, grads);
      }};
  EXPECT_LT(finite_difference_check(op, x, kEps, opts(9)).max_rel_error, kTol);
}

TEST(LayerGrads, AddScaleZero) {
  LayerParams<float> p("x", Tensor4<float>(1, 1, 1, 2), {0.0f});
  LayerGrads<float> a(p), b(p);
  a.weights[0] = 1;
  b.weights[0] = 2;
  b.bias[0] = 3;
  a.add(b);
  a.scale(0.5f);
  EXPECT_FLOAT_EQ(a.weights[0], 1.5f);
  EXPECT_FLOAT_EQ(a.bias[0], 1.5f);
  a.zero();
  EXPECT_FLOAT_EQ(a.weights[0], 0.0f);
}
