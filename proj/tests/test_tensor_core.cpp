#include <gtest/gtest.h>

#include <cmath>

#include "mofill/error.hpp"
#include "mofill/kernels.hpp"
#include "mofill/simd.hpp"
#include "test_util.hpp"

using namespace mofill;
using test::random_tensor;
using test::random_vector;

TEST(Tensor, ShapeAndIndexing) {
  Tensor4<float> t(2, 3, 4, 5);
  EXPECT_EQ(t.size(), 120u);
  t.at(1, 2, 3, 4) = 7.0f;
  EXPECT_EQ(t[119], 7.0f);
  EXPECT_EQ(t.plane(1, 2)[19], 7.0f);
  EXPECT_THROW(Tensor4<float>(Shape4{-1, 1, 1, 1}), ShapeError);
  EXPECT_EQ(t.shape().str(), "2x3x4x5");
}

TEST(Tensor, CastRoundTrip) {
  const auto d = random_tensor<double>({1, 2, 3, 4}, 1);
  const auto f = d.cast<float>();
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(f[i], static_cast<float>(d[i]));
}

TEST(Tensor, FiniteAndDot) {
  std::vector<float> v{1.0f, 2.0f};
  EXPECT_TRUE(all_finite<float>(v));
  v[1] = NAN;
  EXPECT_FALSE(all_finite<float>(v));
  Tensor4<double> a(1, 1, 1, 3, 2.0), b(1, 1, 1, 3, 0.5);
  EXPECT_DOUBLE_EQ(dot(a, b), 3.0);
}

TEST(SamePadding, CeilOutputHighSidePad) {
  // (in, stride) -> (out, lo, hi)
  struct Case { int in, s, out, lo, hi; };
  for (Case c : {Case{69, 1, 69, 1, 1}, Case{69, 2, 35, 1, 1}, Case{240, 2, 120, 0, 1},
                 Case{35, 2, 18, 1, 1}, Case{18, 2, 9, 0, 1}, Case{1, 2, 1, 1, 1}}) {
    const SamePadding p = same_padding(c.in, c.s);
    EXPECT_EQ(p.out, c.out) << c.in << "/" << c.s;
    EXPECT_EQ(p.pad_lo, c.lo) << c.in << "/" << c.s;
    EXPECT_EQ(p.pad_hi, c.hi) << c.in << "/" << c.s;
  }
}

namespace {

struct RandomConvCase {
  int n, cin, cout, h, w, sh, sw;
};

RandomConvCase draw_case(Rng& rng) {
  RandomConvCase c;
  c.n = static_cast<int>(rng.uniform_int(1, 2));
  c.cin = static_cast<int>(rng.uniform_int(1, 4));
  c.cout = static_cast<int>(rng.uniform_int(1, 4));
  c.h = static_cast<int>(rng.uniform_int(1, 9));
  c.w = static_cast<int>(rng.uniform_int(1, 9));
  c.sh = static_cast<int>(rng.uniform_int(1, 2));
  c.sw = static_cast<int>(rng.uniform_int(1, 2));
  return c;
}

}  // namespace

TEST(ConvOracle, Conv2dMatches100RandomShapes) {
  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    const auto c = draw_case(rng);
    const auto x = random_tensor<double>({c.n, c.cin, c.h, c.w}, 100 + k);
    const auto w = random_tensor<double>({c.cout, c.cin, 3, 3}, 200 + k);
    const auto b = random_vector<double>(c.cout, 300 + k);
    const ConvSpec spec{c.cout, c.cin, c.sh, c.sw};
    const auto got = conv2d_forward<double>(x, spec, w, b);
    const auto want = test::oracle_conv(x, w, b, c.sh, c.sw);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LT(test::max_abs_diff(got, want), 1e-6) << "case " << k;
  }
}

TEST(ConvOracle, ConvTransposeMatches100RandomShapes) {
  Rng rng(12);
  for (int k = 0; k < 100; ++k) {
    const auto c = draw_case(rng);
    const int ih = test::ceil_div(c.h, c.sh), iw = test::ceil_div(c.w, c.sw);
    const auto x = random_tensor<double>({c.n, c.cin, ih, iw}, 400 + k);
    const auto w = random_tensor<double>({c.cin, c.cout, 3, 3}, 500 + k);
    const auto b = random_vector<double>(c.cout, 600 + k);
    const ConvSpec spec{c.cout, c.cin, c.sh, c.sw};
    const auto got = convtranspose2d_forward<double>(x, spec, w, b, Size2{c.h, c.w});
    const auto want = test::oracle_conv_transpose(x, w, b, c.sh, c.sw, c.h, c.w);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LT(test::max_abs_diff(got, want), 1e-6) << "case " << k;
  }
}

TEST(ConvOracle, MaxPoolMatches100RandomShapes) {
  Rng rng(13);
  for (int k = 0; k < 100; ++k) {
    const auto c = draw_case(rng);
    const auto x = random_tensor<double>({c.n, c.cin, c.h, c.w}, 700 + k);
    const auto got = maxpool2d_forward<double>(x);
    const auto want = test::oracle_maxpool(x);
    ASSERT_EQ(got.output.shape(), want.shape());
    EXPECT_LT(test::max_abs_diff(got.output, want), 1e-12) << "case " << k;
  }
}

TEST(ConvOracle, FloatKernelsAgreeWithDoubleOracle) {
  Rng rng(14);
  for (int k = 0; k < 30; ++k) {
    auto c = draw_case(rng);
    c.cin *= 5;  // wide enough to hit the vector paths
    c.w += 30;
    const auto x = random_tensor<double>({c.n, c.cin, c.h, c.w}, 800 + k);
    const auto w = random_tensor<double>({c.cout, c.cin, 3, 3}, 900 + k);
    const auto b = random_vector<double>(c.cout, 1000 + k);
    const ConvSpec spec{c.cout, c.cin, c.sh, c.sw};
    const std::vector<float> bf(b.begin(), b.end());
    const auto got = conv2d_forward<float>(x.cast<float>(), spec, w.cast<float>(), bf);
    EXPECT_LT(test::max_abs_diff(got.cast<double>(), test::oracle_conv(x, w, b, c.sh, c.sw)), 1e-4);
  }
}

// <conv(x), y> == <x, conv^T(y)> for the bias-free linear maps.
TEST(Adjointness, ConvAndTransposedConvAreAdjoint) {
  Rng rng(15);
  for (int k = 0; k < 50; ++k) {
    const auto c = draw_case(rng);
    const ConvSpec spec{c.cout, c.cin, c.sh, c.sw};
    const auto x = random_tensor<double>({c.n, c.cin, c.h, c.w}, 1100 + k);
    const auto w = random_tensor<double>({c.cout, c.cin, 3, 3}, 1200 + k);
    const int oh = test::ceil_div(c.h, c.sh), ow = test::ceil_div(c.w, c.sw);
    const auto y = random_tensor<double>({c.n, c.cout, oh, ow}, 1300 + k);
    const auto ax = conv2d_forward<double>(x, spec, w, {});
    const ConvSpec tspec{c.cin, c.cout, c.sh, c.sw};
    const auto aty = convtranspose2d_forward<double>(y, tspec, w, {}, Size2{c.h, c.w});
    const double lhs = dot(ax, y), rhs = dot(x, aty);
    EXPECT_LT(std::fabs(lhs - rhs), 1e-5 * std::max(1.0, std::fabs(lhs))) << "case " << k;
  }
}

TEST(Adjointness, ConvBackwardInputIsTheAdjoint) {
  const ConvSpec spec{3, 2, 2, 2};
  const auto x = random_tensor<double>({1, 2, 7, 10}, 1);
  const auto w = random_tensor<double>({3, 2, 3, 3}, 2);
  const auto g = random_tensor<double>({1, 3, 4, 5}, 3);
  const auto grads = conv2d_backward<double>(g, x, spec, w);
  EXPECT_NEAR(dot(conv2d_forward<double>(x, spec, w, {}), g), dot(x, grads.input), 1e-9);
}

TEST(ConvErrors, ShapeMismatchesAreRejected) {
  const ConvSpec spec{2, 3, 1, 1};
  EXPECT_THROW(conv2d_forward<float>(Tensor4<float>(1, 2, 4, 4), spec, Tensor4<float>(2, 3, 3, 3), {}),
               ShapeError);
  const ConvSpec tspec{2, 3, 2, 2};
  // ceil(9 / 2) = 5, not 4
  EXPECT_THROW(convtranspose2d_forward<float>(Tensor4<float>(1, 3, 4, 4), tspec,
                                              Tensor4<float>(3, 2, 3, 3), {}, Size2{9, 9}),
               ShapeError);
}

TEST(MaxPool, TiesGoToTheFirstIndex) {
  Tensor4<double> x(1, 1, 2, 2, 1.0);
  const auto r = maxpool2d_forward<double>(x);
  EXPECT_EQ(r.index.argmax[0], 0);
  const auto g = maxpool2d_backward<double>(Tensor4<double>(1, 1, 1, 1, 5.0), r.index);
  EXPECT_EQ(g[0], 5.0);
  EXPECT_EQ(g[1] + g[2] + g[3], 0.0);
}

TEST(MaxPool, OddSizesUseCeilMode) {
  const auto r = maxpool2d_forward<float>(Tensor4<float>(1, 1, 69, 35));
  EXPECT_EQ(r.output.h(), 35);
  EXPECT_EQ(r.output.w(), 18);
}

TEST(LeakyRelu, ForwardBackward) {
  Tensor4<float> x(1, 1, 1, 4);
  x[0] = -2; x[1] = -0.5; x[2] = 0; x[3] = 3;
  const auto y = leaky_relu_forward(x, 0.2f);
  EXPECT_FLOAT_EQ(y[0], -0.4f);
  EXPECT_FLOAT_EQ(y[1], -0.1f);
  EXPECT_FLOAT_EQ(y[2], 0.0f);
  EXPECT_FLOAT_EQ(y[3], 3.0f);
  const auto g = leaky_relu_backward(Tensor4<float>(1, 1, 1, 4, 1.0f), x, 0.2f);
  EXPECT_FLOAT_EQ(g[0], 0.2f);
  EXPECT_FLOAT_EQ(g[3], 1.0f);
}

TEST(L1Loss, MeanAndSubgradient) {
  Tensor4<double> p(1, 1, 1, 4), t(1, 1, 1, 4);
  p[0] = 1; p[1] = -1; p[2] = 2; p[3] = 0;
  EXPECT_DOUBLE_EQ(l1_loss(p, t), 1.0);
  const auto g = l1_loss_backward(p, t);
  EXPECT_DOUBLE_EQ(g[0], 0.25);
  EXPECT_DOUBLE_EQ(g[1], -0.25);
  EXPECT_DOUBLE_EQ(g[3], 0.0);
}

// ---------------------------------------------------------------------------
// SIMD variants against the scalar reference.

namespace {

std::vector<simd::Isa> available_isas() {
  std::vector<simd::Isa> out;
  for (auto isa : {simd::Isa::scalar, simd::Isa::avx2, simd::Isa::avx512})
    if (simd::isa_supported(isa)) out.push_back(isa);
  return out;
}

// Plain triple loop, double accumulation.
template <typename T>
void naive_gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
                int ldb, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p)
        acc += static_cast<double>(ta ? a[p * lda + i] : a[i * lda + p]) *
               static_cast<double>(tb ? b[j * ldb + p] : b[p * ldb + j]);
      c[i * ldc + j] = static_cast<T>(alpha * acc + (beta == T(0) ? 0.0 : beta * c[i * ldc + j]));
    }
}

}  // namespace

TEST(Simd, ScalarIsAlwaysAvailable) {
  EXPECT_TRUE(simd::isa_supported(simd::Isa::scalar));
  EXPECT_EQ(simd::parse_isa("avx2"), simd::Isa::avx2);
  EXPECT_THROW(simd::parse_isa("sse9"), UsageError);
}

TEST(Simd, GemmMatchesNaiveForEveryIsaAndTransposition) {
  Rng rng(21);
  for (auto isa : available_isas()) {
    const auto& kt = simd::kernels(isa);
    for (int rep = 0; rep < 24; ++rep) {
      const int m = static_cast<int>(rng.uniform_int(1, 70));
      const int n = static_cast<int>(rng.uniform_int(1, 90));
      const int k = static_cast<int>(rng.uniform_int(1, 300));
      const bool ta = rep & 1, tb = rep & 2;
      const float beta = (rep & 4) ? 0.5f : 0.0f;
      const int lda = ta ? m : k, ldb = tb ? k : n;
      const auto a = random_vector<float>(static_cast<std::size_t>(m) * k, 10 + rep);
      const auto b = random_vector<float>(static_cast<std::size_t>(k) * n, 20 + rep);
      auto c0 = random_vector<float>(static_cast<std::size_t>(m) * n, 30 + rep);
      auto c1 = c0;
      kt.sgemm(ta, tb, m, n, k, 1.5f, a.data(), lda, b.data(), ldb, beta, c1.data(), n);
      naive_gemm(ta, tb, m, n, k, 1.5f, a.data(), lda, b.data(), ldb, beta, c0.data(), n);
      for (std::size_t i = 0; i < c0.size(); ++i)
        ASSERT_NEAR(c1[i], c0[i], 1e-4 * std::sqrt(k) + 1e-5)
            << simd::isa_name(isa) << " m=" << m << " n=" << n << " k=" << k;

      const auto ad = random_vector<double>(a.size(), 40 + rep);
      const auto bd = random_vector<double>(b.size(), 50 + rep);
      std::vector<double> d0(c0.size(), 1.0), d1(c0.size(), 1.0);
      kt.dgemm(ta, tb, m, n, k, 1.0, ad.data(), lda, bd.data(), ldb, beta, d1.data(), n);
      naive_gemm<double>(ta, tb, m, n, k, 1.0, ad.data(), lda, bd.data(), ldb, beta, d0.data(), n);
      for (std::size_t i = 0; i < d0.size(); ++i) ASSERT_NEAR(d1[i], d0[i], 1e-10);
    }
  }
}

TEST(Simd, GemmRowsMatchesStridedGemm) {
  Rng rng(22);
  for (auto isa : available_isas()) {
    const auto& kt = simd::kernels(isa);
    for (int rep = 0; rep < 12; ++rep) {
      const int m = static_cast<int>(rng.uniform_int(1, 40));
      const int n = static_cast<int>(rng.uniform_int(1, 100));
      const int k = static_cast<int>(rng.uniform_int(1, 80));
      const bool tb = rep & 1;
      const int rows = tb ? n : k, cols = tb ? k : n;
      const auto a = random_vector<float>(static_cast<std::size_t>(m) * k, 60 + rep);
      const auto b = random_vector<float>(static_cast<std::size_t>(rows) * cols, 70 + rep);
      // rows stored in reverse order to make sure the pointers are honoured
      std::vector<float> shuffled(b.size());
      std::vector<const float*> ptrs(rows);
      for (int r = 0; r < rows; ++r) {
        std::copy_n(b.data() + r * cols, cols, shuffled.data() + (rows - 1 - r) * cols);
        ptrs[r] = shuffled.data() + (rows - 1 - r) * cols;
      }
      std::vector<float> c0(static_cast<std::size_t>(m) * n), c1(c0.size());
      kt.sgemm(false, tb, m, n, k, 1.0f, a.data(), k, b.data(), cols, 0.0f, c0.data(), n);
      kt.sgemm_rows(tb, m, n, k, 1.0f, a.data(), k, ptrs.data(), 0.0f, c1.data(), n);
      for (std::size_t i = 0; i < c0.size(); ++i) ASSERT_NEAR(c1[i], c0[i], 1e-5);
    }
  }
}

TEST(Simd, ElementwiseKernelsMatchScalar) {
  const auto& ref = simd::kernels(simd::Isa::scalar);
  const std::size_t n = 1037;
  const auto x = random_vector<float>(n, 1);
  const auto g = random_vector<float>(n, 2);
  for (auto isa : available_isas()) {
    const auto& kt = simd::kernels(isa);
    std::vector<float> y0(n), y1(n);
    ref.leaky_relu(x.data(), y0.data(), n, 0.2f);
    kt.leaky_relu(x.data(), y1.data(), n, 0.2f);
    EXPECT_EQ(y0, y1) << simd::isa_name(isa);
    ref.leaky_relu_backward(x.data(), g.data(), y0.data(), n, 0.2f);
    kt.leaky_relu_backward(x.data(), g.data(), y1.data(), n, 0.2f);
    EXPECT_EQ(y0, y1) << simd::isa_name(isa);
    EXPECT_NEAR(ref.abs_diff_sum(x.data(), g.data(), n), kt.abs_diff_sum(x.data(), g.data(), n), 1e-9);

    auto p0 = x, p1 = x;
    std::vector<float> m0(n, 0.1f), m1 = m0, v0(n, 0.01f), v1 = v0;
    ref.adam_update(p0.data(), m0.data(), v0.data(), g.data(), n, 0.9f, 0.999f, 0.01f, 1000.0f, 1e-8f);
    kt.adam_update(p1.data(), m1.data(), v1.data(), g.data(), n, 0.9f, 0.999f, 0.01f, 1000.0f, 1e-8f);
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_NEAR(p0[i], p1[i], 1e-6);
      ASSERT_NEAR(m0[i], m1[i], 1e-7);
      ASSERT_NEAR(v0[i], v1[i], 1e-7);
    }
  }
}

TEST(Simd, ConvolutionAgreesAcrossIsas) {
  const ConvSpec spec{16, 8, 1, 1};
  const auto x = random_tensor<float>({2, 8, 23, 41}, 5);
  const auto w = random_tensor<float>({16, 8, 3, 3}, 6);
  const auto b = random_vector<float>(16, 7);
  const auto before = simd::active_isa();
  simd::set_active_isa(simd::Isa::scalar);
  const auto ref = conv2d_forward<float>(x, spec, w, b);
  const auto gref = conv2d_backward<float>(ref, x, spec, w);
  for (auto isa : available_isas()) {
    simd::set_active_isa(isa);
    const auto out = conv2d_forward<float>(x, spec, w, b);
    EXPECT_LT(test::max_abs_diff(out, ref), 1e-4) << simd::isa_name(isa);
    const auto g = conv2d_backward<float>(ref, x, spec, w);
    EXPECT_LT(test::max_abs_diff(g.input, gref.input), 1e-3) << simd::isa_name(isa);
    EXPECT_LT(test::max_abs_diff(g.weights, gref.weights), 1e-2) << simd::isa_name(isa);
  }
  simd::set_active_isa(before);
}
