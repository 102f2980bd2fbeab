#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgflow/errors.hpp"
#include "dgflow/gradcheck.hpp"
#include "dgflow/tape.hpp"

using namespace dgflow;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return Tensor::matrix(r, c, std::move(v));
}

}  // namespace

TEST(Tape, ElementwiseGradientsMatchFiniteDifferences) {
  const Tensor x = random_matrix(3, 4, 1, 0.5, 1.5);
  const VarFn f = [](const Var& v) {
    return sum(tanh(v) * sin(v) + cos(v) / (v + 2.0) - rsqrt(v * v + 1.0) + 3.0 * v - (1.0 - v));
  };
  EXPECT_LT(grad_check(f, x), 1e-8);
}

TEST(Tape, MatmulAndReductionsMatchFiniteDifferences) {
  const Tensor x = random_matrix(4, 3, 2);
  const Tensor w = random_matrix(5, 3, 3);
  const VarFn f = [&](const Var& v) {
    Tape& t = v.tape();
    const Var wv = t.constant(w);
    const Var h = tanh(matmul(v, wv, false, true));           // [4 x 5]
    const Var g = matmul(wv, h, true, true);                  // [3 x 4]
    const Var s = sum_rows(h) * sum_rows(h);                  // [5]
    return sum(g) + sum(s) + sum(broadcast_cols(sum_cols(v), 2) * 0.5);
  };
  EXPECT_LT(grad_check(f, x), 1e-8);
}

TEST(Tape, StructuralOpsMatchFiniteDifferences) {
  const Tensor x = random_matrix(2, 6, 4);
  const VarFn f = [](const Var& v) {
    const Var r = roll(v, 2, 6) * v;
    const Var s = slice_cols(v, 1, 3);
    const Var p = pad_cols(s * s, 2, 6);
    const Var c = concat_cols(s, tanh(s));
    return sum(r + p) + sum(c * c) + sum(reshape(v, {3, 4}) * reshape(v, {3, 4}));
  };
  EXPECT_LT(grad_check(f, x), 1e-8);
}

TEST(Tape, RollShiftsForward) {
  Tape t;
  const Var x = t.constant(Tensor::vector({0, 1, 2, 3, 4}));
  const Tensor y = roll(x, 1, 5).value();
  // y[i] = x[(i + 1) mod 5]
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[4], 0.0);
  const Tensor z = roll(x, -2, 5).value();
  EXPECT_EQ(z[0], 3.0);
}

TEST(Tape, ConvolutionMatchesDirectLoop) {
  const std::size_t n = 7, cin = 2, cout = 3, k = 3;
  const Tensor kernel = random_matrix(cout, cin * k, 5).reshaped({cout, cin, k});
  const Tensor x = random_matrix(cin, n, 6);
  Tape t;
  const Tensor y = conv1d_periodic(t.constant(kernel), t.constant(x)).value();
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < n; ++i) {
      double want = 0.0;
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t j = 0; j < k; ++j)
          want += kernel.values()[(o * cin + c) * k + j] * x.at(c, (i + j + n - 1) % n);
      EXPECT_NEAR(y.at(o, i), want, 1e-14);
    }
}

TEST(Tape, RowConvolutionAgreesWithChannelLayout) {
  const std::size_t n = 6, b = 2, cout = 4;
  for (std::size_t cin : {1u, 2u}) {
    const Tensor kernel = random_matrix(cout, cin * 3, 7).reshaped({cout, cin, 3});
    const Tensor rows = random_matrix(b * n, cin, 8);
    Tape t;
    const Tensor y = conv1d_periodic_rows(t.constant(kernel), t.constant(rows), n).value();
    for (std::size_t s = 0; s < b; ++s) {
      std::vector<double> chan(cin * n);
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t i = 0; i < n; ++i) chan[c * n + i] = rows.at(s * n + i, c);
      const Tensor ref = conv1d_periodic(t.constant(kernel), t.constant(Tensor::matrix(cin, n, chan))).value();
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y.at(s * n + i, o), ref.at(o, i), 1e-14);
    }
  }
}

TEST(Tape, ConvolutionGradientsMatchFiniteDifferences) {
  const Tensor kernel = random_matrix(3, 3, 9).reshaped({3, 1, 3});
  const Tensor x = random_matrix(10, 1, 10);
  const VarFn fx = [&](const Var& v) {
    return sum(tanh(conv1d_periodic_rows(v.tape().constant(kernel), v, 5)));
  };
  EXPECT_LT(grad_check(fx, x), 1e-8);
  const VarFn fk = [&](const Var& k) {
    return sum(tanh(conv1d_periodic_rows(reshape(k, {3, 1, 3}), k.tape().constant(x), 5)));
  };
  EXPECT_LT(grad_check(fk, kernel.reshaped({9})), 1e-8);
}

TEST(Tape, DoubleBackward) {
  Tape t;
  const Var x = t.leaf(Tensor::scalar(1.5));
  const Var y = x * x * x;
  const Var g = t.backward(y, {x}).at(x);  // 3x^2
  EXPECT_DOUBLE_EQ(g.value().item(), 3 * 1.5 * 1.5);
  const Var gg = t.backward(g, {x}).at(x);  // 6x
  EXPECT_DOUBLE_EQ(gg.value().item(), 9.0);
}

TEST(Tape, UnreachableGradientIsZero) {
  Tape t;
  const Var x = t.leaf(Tensor::vector({1, 2}));
  const Var z = t.leaf(Tensor::vector({3, 4}));
  const GradMap g = t.backward(sum(x * x), {x, z});
  EXPECT_FALSE(g.has(z));
  EXPECT_EQ(g.value(z)[1], 0.0);
  EXPECT_THROW(g.at(z), std::exception);
}

TEST(Tape, RootMustBeScalar) {
  Tape t;
  const Var x = t.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(t.backward(x * x, {x}), ShapeError);
}

TEST(Tape, ShapeErrors) {
  Tape t;
  const Var a = t.leaf(Tensor::vector({1, 2, 3}));
  const Var b = t.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(a + b, ShapeError);
  EXPECT_THROW(matmul(t.leaf(Tensor::zeros({2, 3})), t.leaf(Tensor::zeros({2, 3}))), ShapeError);
}

TEST(Tape, DivisionByZeroIsNumericalError) {
  Tape t;
  const Var a = t.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(a / t.constant(Tensor::vector({1, 0})), NumericalError);
}

TEST(Tape, ReplayIsBitwiseReproducible) {
  Tape t;
  const Var x = t.leaf(random_matrix(3, 3, 11));
  const Var y = sum(tanh(matmul(x, x)) * x);
  t.backward(y, {x});
  EXPECT_TRUE(t.verify_replay());
  const Tensor before = y.value();
  t.replay({{x, random_matrix(3, 3, 12)}});
  EXPECT_FALSE(before.identical(y.value()));
  t.replay({{x, random_matrix(3, 3, 11)}});
  EXPECT_TRUE(before.identical(y.value()));
}

TEST(Tape, SinglePrecisionRoundsResults) {
  Tape t(Precision::f32);
  const Var x = t.leaf(Tensor::scalar(1.0));
  const Var y = x / t.constant(3.0);
  EXPECT_EQ(y.value().item(), static_cast<double>(1.0f / 3.0f));
}

TEST(Tape, TanhKernelAgreesWithStd) {
  std::vector<double> x, y(2001);
  for (int i = -1000; i <= 1000; ++i) x.push_back(i * 0.02);
  tanh_kernel(x.data(), y.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], std::tanh(x[i]), 4e-16);
}
