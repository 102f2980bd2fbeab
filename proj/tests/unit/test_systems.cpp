#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dgflow/gradcheck.hpp"
#include "dgflow/integrators.hpp"
#include "dgflow/systems.hpp"

using namespace dgflow;

namespace {

Tensor random_state(std::size_t n, std::uint64_t seed, double amp = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return Tensor::vector(std::move(v));
}

}  // namespace

TEST(Systems, MassSpringValues) {
  const auto s = ode_system("mass_spring");
  const Tensor x = Tensor::vector({1.0, 0.0});
  EXPECT_DOUBLE_EQ(energy_values(*s, x)[0], 0.5);
  const Tensor r = s->rhs(x);
  EXPECT_DOUBLE_EQ(r[0], 0.0);
  EXPECT_DOUBLE_EQ(r[1], -1.0);
}

TEST(Systems, PendulumEquilibrium) {
  const auto s = ode_system("pendulum");
  const Tensor x = Tensor::vector({0.0, 0.0});
  EXPECT_DOUBLE_EQ(energy_values(*s, x)[0], 0.0);
  EXPECT_EQ(max_abs(s->rhs(x)), 0.0);
  EXPECT_NEAR(energy_values(*s, Tensor::vector({std::numbers::pi, 0.0}))[0], 4.0, 1e-15);
}

TEST(Systems, AnalyticGradientsMatchAutodiff) {
  std::vector<std::unique_ptr<AnalyticSystem>> systems;
  systems.push_back(ode_system("mass_spring"));
  systems.push_back(ode_system("pendulum", 0.2));
  systems.push_back(ode_system("twobody"));
  systems.push_back(kdv_system());
  systems.push_back(ch_system());
  for (const auto& s : systems) {
    Tensor x = random_state(s->state_dim(), 5);
    if (s->name() == "twobody") x = Tensor::vector({1, 0.2, -1, -0.1, 0.1, 0.5, -0.1, -0.5});
    const Tensor x2 = x.reshaped({1, s->state_dim()});
    EXPECT_LT(max_abs_diff(s->analytic_gradient(x2), gradient(*s, x2)), 1e-11) << s->name();
    const ScalarFn f = scalar_fn(*s);
    const double scale = std::max(1.0, max_abs(s->analytic_gradient(x)));
    EXPECT_LT(max_abs_diff(numeric_gradient(f, x), s->analytic_gradient(x)) / scale, 1e-7) << s->name();
  }
}

TEST(Systems, KdvRhsConservesMassAndEnergyRate) {
  const auto s = kdv_system();
  const Tensor x = random_state(50, 2).reshaped({1, 50});
  const Tensor r = s->rhs(x);
  double mass_rate = 0.0;
  for (double v : r.values()) mass_rate += v;
  EXPECT_NEAR(mass_rate, 0.0, 1e-10);
  // dH/dt = grad H . rhs = 0 for skew G
  EXPECT_NEAR(dot(s->analytic_gradient(x), r), 0.0, 1e-9);
}

TEST(Systems, CahnHilliardDissipates) {
  const auto s = ch_system();
  const Tensor x = random_state(50, 3, 0.05).reshaped({1, 50});
  const Tensor r = s->rhs(x);
  EXPECT_LE(dot(s->analytic_gradient(x), r), 0.0);
}

TEST(Systems, TwoBodyCircularOrbitRhs) {
  // r = 1 from the centre, speed sqrt(1/4) keeps the separation constant.
  const auto s = ode_system("twobody");
  const double v = 0.5;
  const Tensor x = Tensor::vector({1, 0, -1, 0, 0, v, 0, -v});
  const std::vector<double> t{0.0, 0.01, 0.02};
  const RolloutResult ref = integrate_dopri([&](const Tensor& u) { return s->rhs(u); }, x, t,
                                            DopriOptions{1e-12, 1e-12});
  const Tensor fd = (1.0 / 0.02) * (ref.states[2] - ref.states[0]);
  EXPECT_LT(max_abs_diff(fd, s->rhs(ref.states[1])), 1e-4);
  const Tensor r = s->rhs(x);
  EXPECT_NEAR(r[4], -0.25, 1e-15);  // attraction G m1 m2 / (2r)^2
}

TEST(Systems, UnknownSystemThrows) { EXPECT_THROW(ode_system("lorenz"), std::invalid_argument); }
