#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <fstream>

#include "dgflow/errors.hpp"
#include "dgflow/generate.hpp"
#include "dgflow/systems.hpp"

using namespace dgflow;

namespace {

double mass(const Tensor& row, double dx) {
  double s = 0.0;
  for (double v : row.values()) s += v;
  return s * dx;
}

KdvGenConfig small_kdv() {
  KdvGenConfig c;
  c.n_series = 3;
  c.n_train = 2;
  c.steps = 20;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Generate, SeedsAreDistinctAndStable) {
  EXPECT_EQ(trajectory_seed(1, 0), trajectory_seed(1, 0));
  EXPECT_NE(trajectory_seed(1, 0), trajectory_seed(1, 1));
  EXPECT_NE(trajectory_seed(1, 0), trajectory_seed(2, 0));
}

TEST(Generate, KdvInitialStateHasSolitonPeaks) {
  const KdvGenConfig c = small_kdv();
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> kappa(c.kappa_lo, c.kappa_hi);
    const double k1 = kappa(rng), k2 = kappa(rng);
    const double kmax = std::max(k1, k2);
    const Tensor u = kdv_initial_state(c, s);
    const double peak = *std::max_element(u.values().begin(), u.values().end());
    const double sech = 1.0 / std::cosh(kmax * c.dx / 2.0);
    EXPECT_GE(peak, 2.0 * kmax * kmax * sech * sech - 1e-9);
    EXPECT_LE(peak, 2.0 * (k1 * k1 + k2 * k2));
    EXPECT_GT(*std::min_element(u.values().begin(), u.values().end()), 0.0);
  }
}

TEST(Generate, KdvConservesEnergyAndMass) {
  const KdvGenConfig c = small_kdv();
  const Dataset ds = gen_kdv(c);
  EXPECT_EQ(ds.train.size(), 2u);
  EXPECT_EQ(ds.test.size(), 1u);
  const KdvSystem sys(c.n, c.dx);
  for (const auto& tr : ds.train) {
    ASSERT_EQ(tr.length(), c.steps + 1);
    EXPECT_NEAR(tr.uniform_dt(), c.dt, 1e-15);
    const Tensor h = energy_values(sys, tr.states);
    for (std::size_t t = 0; t < tr.length(); ++t) {
      EXPECT_NEAR(h[t], h[0], 1e-8);
      EXPECT_NEAR(mass(tr.state(t), c.dx), mass(tr.state(0), c.dx), 1e-10);
    }
  }
}

TEST(Generate, DeterministicRegeneration) {
  KdvGenConfig c = small_kdv();
  const Dataset a = gen_kdv(c);
  c.deterministic = true;
  const Dataset b = gen_kdv(c);
  for (std::size_t i = 0; i < a.train.size(); ++i)
    EXPECT_EQ(a.train[i].states.values(), b.train[i].states.values());
  c.seed = 6;
  EXPECT_NE(gen_kdv(c).train[0].states.values(), a.train[0].states.values());
}

TEST(Generate, CahnHilliardDissipates) {
  ChGenConfig c;
  c.n_series = 2;
  c.n_train = 1;
  c.steps = 30;
  c.seed = 2;
  const Dataset ds = gen_ch(c);
  const CahnHilliardSystem sys(c.n, c.dx, c.gamma);
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& tr : *split) {
      for (double v : tr.state(0).values()) EXPECT_LE(std::abs(v), 0.05);
      const Tensor h = energy_values(sys, tr.states);
      for (std::size_t t = 1; t < tr.length(); ++t) EXPECT_LE(h[t], h[t - 1] + 1e-9);
      EXPECT_LT(h[tr.length() - 1], h[0]);
      EXPECT_NEAR(mass(tr.state(tr.length() - 1), c.dx), mass(tr.state(0), c.dx), 1e-10);
    }
  }
}

TEST(Generate, OdeCountsAndGrid) {
  const Dataset ds = gen_ode(OdeGenConfig::defaults("mass_spring"));
  EXPECT_EQ(ds.train.size(), 25u);
  EXPECT_EQ(ds.test.size(), 25u);
  EXPECT_EQ(ds.long_term.size(), 15u);
  EXPECT_EQ(ds.train[0].length(), 30u);
  EXPECT_EQ(ds.long_term[0].length(), 100u);
  EXPECT_NEAR(ds.dt, 20.0 / 99.0, 1e-15);
  EXPECT_NEAR(ds.train[3].uniform_dt(), 20.0 / 99.0, 1e-12);
  EXPECT_THROW(OdeGenConfig::defaults("lorenz"), std::invalid_argument);
}

TEST(Generate, CleanSpringKeepsEnergy) {
  OdeGenConfig c = OdeGenConfig::defaults("mass_spring");
  c.noise = 0.0;
  const Dataset ds = gen_ode(c);
  const auto sys = ode_system("mass_spring");
  for (const auto* split : {&ds.train, &ds.long_term}) {
    for (const auto& tr : *split) {
      const Tensor h = energy_values(*sys, tr.states);
      for (std::size_t t = 0; t < tr.length(); ++t) EXPECT_NEAR(h[t], h[0], 1e-8);
    }
  }
}

TEST(Generate, NoiseOnlyOnTrainAndTest) {
  OdeGenConfig c = OdeGenConfig::defaults("pendulum");
  c.n_train = c.n_test = c.n_long = 3;
  const Dataset noisy = gen_ode(c);
  c.noise = 0.0;
  const Dataset clean = gen_ode(c);
  EXPECT_NE(noisy.train[0].states.values(), clean.train[0].states.values());
  EXPECT_EQ(noisy.long_term[0].states.values(), clean.long_term[0].states.values());
  EXPECT_EQ(noisy.train[0].length(), 45u);
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < noisy.train.size(); ++i)
    for (std::size_t k = 0; k < noisy.train[i].states.numel(); ++k, ++n) {
      const double d = noisy.train[i].states.values()[k] - clean.train[i].states.values()[k];
      ss += d * d;
    }
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n)), 0.1, 0.03);
}

TEST(Generate, TwoBodyConservesMomentum) {
  OdeGenConfig c = OdeGenConfig::defaults("twobody");
  c.n_train = 4;
  c.n_test = 1;
  c.n_long = 1;
  const Dataset ds = gen_ode(c);
  EXPECT_EQ(ds.dim(), 8u);
  for (const auto& tr : ds.train) {
    for (std::size_t t = 0; t < tr.length(); ++t) {
      EXPECT_NEAR(tr.states.at(t, 4) + tr.states.at(t, 6), 0.0, 1e-9);
      EXPECT_NEAR(tr.states.at(t, 5) + tr.states.at(t, 7), 0.0, 1e-9);
    }
  }
}

TEST(Generate, RealPendulumLoader) {
  const auto path = std::filesystem::temp_directory_path() / "dgflow_real_pendulum.csv";
  {
    std::ofstream f(path);
    f << "time,theta,omega\n0.0,0.1,0.0\n0.1,0.09,-0.1\n0.2,0.07,-0.2\n0.3,0.04,-0.25\n0.4,0.01,-0.3\n";
  }
  const Dataset ds = load_real_pendulum(path);
  ASSERT_EQ(ds.train.size(), 1u);
  EXPECT_EQ(ds.train[0].length(), 2u);
  EXPECT_EQ(ds.test[0].length(), 3u);
  EXPECT_DOUBLE_EQ(ds.test[0].states.at(0, 0), 0.07);
  EXPECT_DOUBLE_EQ(ds.test[0].states.at(2, 1), -0.3);
  EXPECT_NEAR(ds.dt, 0.1, 1e-15);
  {
    std::ofstream f(path);
    f << "time,theta,omega\n0.0,0.1,0.0\n0.2,0.07,-0.2\n0.1,0.09,-0.1\n0.3,0.04,-0.25\n0.4,0.01,-0.3\n";
  }
  EXPECT_THROW(load_real_pendulum(path), FormatError);
  {
    std::ofstream f(path);
    f << "time,angle\n0.0,0.1\n";
  }
  EXPECT_THROW(load_real_pendulum(path), FormatError);
  std::filesystem::remove(path);
}
