#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgflow/errors.hpp"
#include "dgflow/gradcheck.hpp"
#include "dgflow/models.hpp"

using namespace dgflow;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  std::vector<double> v(r * c);
  for (double& x : v) x = u(rng);
  return Tensor::matrix(r, c, std::move(v));
}

double gram_error(const Tensor& w, bool columns) {
  const std::size_t r = w.dim(0), c = w.dim(1), k = columns ? c : r;
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t m = 0; m < (columns ? r : c); ++m)
        s += columns ? w.at(m, i) * w.at(m, j) : w.at(i, m) * w.at(j, m);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

ArchSpec conv_arch(std::size_t n, double dx, std::size_t hidden = 16) {
  ArchSpec a;
  a.kind = ArchKind::conv;
  a.state_dim = n;
  a.hidden = {hidden, hidden};
  a.dx = dx;
  return a;
}

}  // namespace

TEST(Models, OrthogonalInitialization) {
  ArchSpec a;
  a.state_dim = 2;
  a.hidden = {200, 200};
  const EnergyModel m(a, 1);
  EXPECT_LT(gram_error(m.params().at("W0"), true), 1e-6);   // 200 x 2
  EXPECT_LT(gram_error(m.params().at("W1"), true), 1e-6);   // 200 x 200
  EXPECT_LT(gram_error(m.params().at("W2"), false), 1e-6);  // 1 x 200
  EXPECT_EQ(max_abs(m.params().at("b0")), 0.0);
}

TEST(Models, SameSeedSameParameters) {
  ArchSpec a;
  a.hidden = {32, 32};
  EXPECT_TRUE(EnergyModel(a, 5).params().identical(EnergyModel(a, 5).params()));
  EXPECT_FALSE(EnergyModel(a, 5).params().identical(EnergyModel(a, 6).params()));
}

TEST(Models, ZeroInputGivesZeroEnergy) {
  ArchSpec a;
  a.hidden = {200, 200};
  const EnergyModel m(a, 3);
  EXPECT_EQ(energy_values(m, Tensor::zeros({4, 2}))[2], 0.0);
  const EnergyModel c(conv_arch(10, 0.2), 3);
  EXPECT_EQ(energy_values(c, Tensor::zeros({1, 10}))[0], 0.0);
}

TEST(Models, ConvEnergyIsExtensive) {
  const EnergyModel a(conv_arch(8, 0.2), 4);
  const EnergyModel b(conv_arch(16, 0.2), a.params());
  const Tensor u = random_matrix(1, 8, 1);
  std::vector<double> twice(u.values());
  twice.insert(twice.end(), u.values().begin(), u.values().end());
  const double h1 = energy_values(a, u)[0];
  const double h2 = energy_values(b, Tensor::matrix(1, 16, twice))[0];
  EXPECT_NEAR(h2, 2 * h1, 1e-13 * std::max(1.0, std::abs(h2)));
}

TEST(Models, ConvGradientMatchesFiniteDifferences) {
  const EnergyModel m(conv_arch(12, 0.2), 5);
  const Tensor u = random_matrix(1, 12, 2);
  const Tensor g = gradient(m, u);
  const Tensor fd = numeric_gradient(scalar_fn(m), u.reshaped({12}), 1e-5);
  const double scale = max_abs(g);
  EXPECT_LT(max_abs_diff(g.reshaped({12}), fd) / scale, 1e-6);
}

TEST(Models, DiscreteGradientOfModels) {
  ArchSpec mlp;
  mlp.hidden = {50, 50};
  ArchSpec sep = mlp;
  sep.kind = ArchKind::separable;
  ArchSpec flat = conv_arch(10, 0.2);
  flat.flattened = true;
  for (const ArchSpec& a : {mlp, sep, conv_arch(10, 0.2), flat}) {
    const EnergyModel m(a, 7);
    const Tensor u = random_matrix(4, a.state_dim, 8), v = random_matrix(4, a.state_dim, 9);
    const DgResult dg = discrete_gradient(m, u, v);
    const DgResiduals r = verify_dg_conditions(m, u, v, dg.dg);
    EXPECT_LT(r.residual1, 1e-12) << to_string(a.kind);
    EXPECT_LT(r.residual2, 1e-12) << to_string(a.kind);
  }
}

TEST(Models, SeparableEnergySplits) {
  ArchSpec a;
  a.kind = ArchKind::separable;
  a.state_dim = 2;
  a.hidden = {20};
  const EnergyModel m(a, 2);
  const Tensor g1 = gradient(m, Tensor::matrix({{0.3, 0.1}}));
  const Tensor g2 = gradient(m, Tensor::matrix({{0.3, -0.8}}));
  EXPECT_DOUBLE_EQ(g1[0], g2[0]);  // dV/dq does not see p
}

TEST(Models, NodeOutputShape) {
  ArchSpec a;
  a.kind = ArchKind::node_mlp;
  a.state_dim = 4;
  a.hidden = {30};
  const NodeModel m(a, 1);
  EXPECT_EQ(m.forward(random_matrix(3, 4, 1)).shape(), (Shape{3, 4}));
  EXPECT_EQ(m.forward(Tensor::vector({1, 2, 3, 4})).shape(), (Shape{4}));
  ArchSpec c = conv_arch(9, 0.1);
  c.kind = ArchKind::node_conv;
  const NodeModel mc(c, 1);
  EXPECT_EQ(mc.forward(random_matrix(2, 9, 1)).shape(), (Shape{2, 9}));
}

TEST(Models, ArchitectureJsonRoundTrip) {
  ArchSpec a = conv_arch(50, 0.2, 200);
  a.flattened = true;
  a.kernel = 5;
  const ArchSpec b = ArchSpec::from_json(a.to_json());
  EXPECT_EQ(b.to_json(), a.to_json());
  EXPECT_EQ(b.kind, ArchKind::conv);
  EXPECT_THROW(ArchSpec::from_json("{"), FormatError);
  EXPECT_THROW(ArchSpec::from_json(R"({"kind":"mlp"})"), FormatError);
}

TEST(Models, ParameterMismatchRejected) {
  ArchSpec a;
  a.hidden = {10};
  ArchSpec b;
  b.hidden = {11};
  EXPECT_THROW(EnergyModel(b, EnergyModel(a, 1).params()), FormatError);
  EXPECT_THROW(EnergyModel(ArchSpec{ArchKind::node_mlp}, 1), std::invalid_argument);
}

TEST(Models, WrongInputShapeThrows) {
  ArchSpec a;
  a.hidden = {10};
  const EnergyModel m(a, 1);
  EXPECT_THROW(energy_values(m, Tensor::zeros({2, 3})), ShapeError);
}

TEST(Models, SinglePrecisionParametersAreRounded) {
  ArchSpec a;
  a.hidden = {10};
  const EnergyModel m(a, 1, Precision::f32);
  for (const auto& t : m.params().values())
    for (double v : t.values()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}
