#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgflow/energy.hpp"
#include "dgflow/errors.hpp"

using namespace dgflow;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return Tensor::matrix(r, c, std::move(v));
}

// A small energy exercising every discrete rule: dense layers, each
// activation, products of state-dependent factors, rolls and slices.
class MixedEnergy final : public Energy {
 public:
  explicit MixedEnergy(std::uint64_t seed) : w1_(random_matrix(6, 4, seed)), w2_(random_matrix(1, 6, seed + 1)) {}
  std::size_t state_dim() const override { return 4; }
  Var energy(const Var& x) const override { return program(x); }
  DVar energy(const DVar& x) const override { return program(x); }

 private:
  template <class V>
  V program(const V& x) const {
    Tape& t = tape_of(x);
    const Var w1 = t.constant(w1_), w2 = t.constant(w2_);
    const V h = tanh(matmul(x, w1, false, true));
    const V out = matmul(sin(h) + cos(h) * h, w2, false, true);
    const V q = slice_cols(x, 0, 2);
    const V r = roll(x, 1, 4) * x;
    return reshape(out, {x.shape()[0]}) + sum_cols(q * q * q) + 0.3 * sum_cols(r) +
           sum_cols(rsqrt(x * x + 1.0));
  }
  static Tape& tape_of(const Var& x) { return x.tape(); }
  static Tape& tape_of(const DVar& x) { return x.graph().tape(); }
  Tensor w1_, w2_;
};

}  // namespace

TEST(Discrete, SecantSlopeValues) {
  Tape t;
  const Var h = t.constant(Tensor::vector({1.0, 0.3, 2.0}));
  const Var k = t.constant(Tensor::vector({0.5, 0.3, 2.0 + 1e-14}));
  const Tensor s = secant_slope(h, k, Activation::tanh, 1e-12).value();
  EXPECT_NEAR(s[0], (std::tanh(1.0) - std::tanh(0.5)) / 0.5, 1e-15);
  const double d = 1.0 / std::cosh(0.3);
  EXPECT_NEAR(s[1], d * d, 1e-15);
  const double e = 1.0 / std::cosh(2.0 + 5e-15);
  EXPECT_NEAR(s[2], e * e, 1e-14);
}

TEST(Discrete, ProductRuleHandValues) {
  // f: 2 -> 1 (df = -1 per unit), g: 3 -> 5; avg(g) * df + avg(f) * dg
  const Tensor r = discrete_product_rule(Tensor::vector({2}), Tensor::vector({1}), Tensor::vector({3}),
                                         Tensor::vector({5}), Tensor::vector({-1}), Tensor::vector({2}));
  EXPECT_DOUBLE_EQ(r[0], 4.0 * -1.0 + 1.5 * 2.0);
}

TEST(Discrete, GradientIdentityOnMixedProgram) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MixedEnergy h(seed);
    const Tensor u = random_matrix(5, 4, 100 + seed), v = random_matrix(5, 4, 200 + seed);
    const DgResult dg = discrete_gradient(h, u, v);
    const DgResiduals r = verify_dg_conditions(h, u, v, dg.dg);
    EXPECT_LT(r.residual1, 1e-12);
    EXPECT_LT(r.residual2, 1e-12);
  }
}

TEST(Discrete, CoincidentAndNearCoincidentStates) {
  const MixedEnergy h(7);
  const Tensor u = random_matrix(3, 4, 1);
  std::vector<double> w(u.values());
  w[0] += 1e-13;  // below the secant threshold
  w[5] += 1e-3;
  const Tensor v = Tensor::matrix(3, 4, w);
  const DgResult dg = discrete_gradient(h, u, v);
  EXPECT_LT(verify_dg_conditions(h, u, v, dg.dg).residual1, 1e-12);
  EXPECT_LT(max_abs_diff(discrete_gradient(h, u, u).dg, gradient(h, u)), 1e-14);
}

TEST(Discrete, SymmetricInArguments) {
  const MixedEnergy h(3);
  const Tensor u = random_matrix(2, 4, 5), v = random_matrix(2, 4, 6);
  // Secant slopes and averages are symmetric, so dg(u, v) = dg(v, u).
  EXPECT_LT(max_abs_diff(discrete_gradient(h, u, v).dg, discrete_gradient(h, v, u).dg), 1e-13);
}

class ConvEnergy final : public Energy {
 public:
  std::size_t state_dim() const override { return 8; }
  Var energy(const Var& x) const override { return program(x, x.tape()); }
  DVar energy(const DVar& x) const override { return program(x, x.graph().tape()); }

 private:
  template <class V>
  V program(const V& x, Tape& t) const {
    const Var k = t.constant(random_matrix(5, 3, 42).reshaped({5, 1, 3}));
    const std::size_t b = x.shape()[0];
    const V y = tanh(conv1d_periodic_rows(k, reshape(x, {b * 8, 1}), 8));
    return sum_cols(reshape(sum_cols(y * y), {b, 8}));
  }
};

TEST(Discrete, ConvolutionRule) {
  const ConvEnergy h;
  const Tensor u = random_matrix(3, 8, 1), v = random_matrix(3, 8, 2);
  const DgResult dg = discrete_gradient(h, u, v);
  const DgResiduals r = verify_dg_conditions(h, u, v, dg.dg);
  EXPECT_LT(r.residual1, 1e-12);
  EXPECT_LT(r.residual2, 1e-12);
}

TEST(Discrete, OperationsWithoutRuleThrow) {
  Tape t;
  DiscreteGraph g(t);
  const DVar x = g.input(t.constant(Tensor::vector({1, 2})), t.constant(Tensor::vector({3, 4})));
  EXPECT_THROW(x / x, NoDiscreteRuleError);
  const DVar m = g.input(t.constant(Tensor::zeros({2, 2})), t.constant(Tensor::zeros({2, 2})));
  EXPECT_THROW(matmul(m, m), NoDiscreteRuleError);
}

TEST(Discrete, ResultIsDifferentiableInParameters) {
  // d/dw of sum(dg) for H = sum(tanh(w x)) against finite differences in w.
  const Tensor u = random_matrix(2, 3, 1), v = random_matrix(2, 3, 2);
  auto value = [&](double wv, bool grad) {
    Tape t;
    const Var w = t.leaf(Tensor::scalar(wv));
    DiscreteGraph g(t);
    const DVar x = g.input(t.constant(u), t.constant(v));
    const DVar e = sum_cols(tanh(x * expand(w, {2, 3})));
    const Var s = sum(g.backward(e, x));
    if (!grad) return s.value().item();
    return t.backward(s, {w}).value(w).item();
  };
  const double h = 1e-6;
  const double fd = (value(0.7 + h, false) - value(0.7 - h, false)) / (2 * h);
  EXPECT_NEAR(value(0.7, true), fd, 1e-8);
}

TEST(ItohAbe, SatisfiesIdentityAndMatchesEnergyDifference) {
  const MixedEnergy h(11);
  const ScalarFn f = scalar_fn(h);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor u = random_matrix(1, 4, 300 + s).reshaped({4});
    const Tensor v = random_matrix(1, 4, 400 + s).reshaped({4});
    const Tensor ia = itoh_abe_gradient(f, u, v);
    EXPECT_NEAR(dot(ia, u - v), f(u) - f(v), 1e-12);
    const Tensor ad = discrete_gradient(h, u, v).dg;
    EXPECT_NEAR(dot(ia, u - v), dot(ad, u - v), 1e-12);
  }
}

TEST(ItohAbe, ReducesToGradientAtCoincidentStates) {
  const MixedEnergy h(12);
  const Tensor u = random_matrix(1, 4, 9).reshaped({4});
  EXPECT_LT(max_abs_diff(itoh_abe_gradient(scalar_fn(h), u, u), gradient(h, u)), 1e-7);
}
