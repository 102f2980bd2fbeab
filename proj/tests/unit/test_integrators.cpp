#include <gtest/gtest.h>

#include <cmath>

#include "dgflow/errors.hpp"
#include "dgflow/integrators.hpp"
#include "dgflow/systems.hpp"

using namespace dgflow;

TEST(Integrators, Rk2OnLinearEquation) {
  const double lambda = -0.7, dt = 0.1;
  const RhsFn f = [&](const Tensor& u) { return lambda * u; };
  const Tensor u1 = step_rk2(f, Tensor::vector({2.0}), dt);
  const double z = lambda * dt;
  EXPECT_NEAR(u1[0], 2.0 * (1 + z + z * z / 2), 1e-15);
}

TEST(Integrators, LeapfrogHandStep) {
  const RhsFn dV = [](const Tensor& q) { return q; };
  const RhsFn dT = [](const Tensor& p) { return p; };
  const double dt = 0.1, q = 1.0, p = 0.5;
  const auto [qn, pn] = step_leapfrog(dV, dT, Tensor::vector({q}), Tensor::vector({p}), dt);
  const double ph = p - dt / 2 * q;
  const double q1 = q + dt * ph;
  EXPECT_NEAR(qn[0], q1, 1e-15);
  EXPECT_NEAR(pn[0], ph - dt / 2 * q1, 1e-15);
}

TEST(Integrators, DopriMatchesClosedForm) {
  const RhsFn f = [](const Tensor& u) { return Tensor::vector({u[1], -u[0]}); };
  std::vector<double> t;
  for (int i = 0; i <= 20; ++i) t.push_back(0.37 * i);
  DopriOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  const RolloutResult r = integrate_dopri(f, Tensor::vector({1.0, 0.0}), t, opt);
  ASSERT_EQ(r.states.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(r.states[i][0], std::cos(t[i]), 1e-8);
    EXPECT_NEAR(r.states[i][1], -std::sin(t[i]), 1e-8);
  }
}

TEST(Integrators, DopriReportsBlowUp) {
  const RhsFn f = [](const Tensor& u) { return hadamard(u, u); };  // u = 1 / (1 - t)
  bool reported = false;
  try {
    integrate_dopri(f, Tensor::vector({1.0}), {0.0, 2.0});
  } catch (const ConvergenceError&) {
    reported = true;
  } catch (const NumericalError&) {
    reported = true;
  }
  EXPECT_TRUE(reported);
}

TEST(Integrators, DiscreteGradientOnQuadraticIsImplicitMidpoint) {
  // For H = (q^2 + p^2) / 2 the scheme is the Cayley map of A = [0 1; -1 0].
  const auto s = ode_system("mass_spring");
  const double dt = 0.3, q = 0.8, p = -0.4;
  DgSolverConfig opt;
  opt.tol = 1e-15;
  const DgStepResult r = step_discrete_gradient(*s, s->gspec(), Tensor::vector({q, p}), dt, opt);
  const double a = dt / 2, det = 1 + a * a;
  const double qe = ((1 - a * a) * q + 2 * a * p) / det;
  const double pe = ((1 - a * a) * p - 2 * a * q) / det;
  EXPECT_NEAR(r.u[0], qe, 1e-12);
  EXPECT_NEAR(r.u[1], pe, 1e-12);
  EXPECT_FALSE(r.diag.newton);
}

TEST(Integrators, NewtonAgreesWithFixedPoint) {
  const auto s = ode_system("pendulum");
  const Tensor u = Tensor::matrix({{1.0, 0.3}, {-0.5, 1.2}});
  DgSolverConfig fp;
  DgSolverConfig nw;
  nw.solver = DgSolver::newton_fd;
  const DgStepResult a = step_discrete_gradient(*s, s->gspec(), u, 0.1, fp);
  const DgStepResult b = step_discrete_gradient(*s, s->gspec(), u, 0.1, nw);
  EXPECT_TRUE(b.diag.newton);
  EXPECT_LT(max_abs_diff(a.u, b.u), 1e-9);
}

TEST(Integrators, StiffStepFallsBackToNewtonAndSticks) {
  const auto s = ch_system();
  std::vector<double> u0(50);
  for (std::size_t i = 0; i < 50; ++i) u0[i] = 0.04 * std::sin(0.7 * i) + 0.01 * std::cos(3.1 * i);
  bool sticky = false;
  const DgStepResult r = step_discrete_gradient(*s, s->gspec(), Tensor::vector(u0), 1e-4, {}, &sticky);
  EXPECT_TRUE(r.diag.newton);
  EXPECT_TRUE(sticky);
  const Tensor h0 = energy_values(*s, Tensor::vector(u0)), h1 = energy_values(*s, r.u);
  EXPECT_LE(h1[0], h0[0] + 1e-12);
}

TEST(Integrators, DiscreteGradientConservesPendulumEnergy) {
  const auto s = ode_system("pendulum");
  StepperConfig cfg;
  cfg.dt = 0.2;
  cfg.dg.tol = 1e-13;
  const Tensor u0 = Tensor::matrix({{2.0, 0.0}});
  const RolloutResult r = rollout(cfg, *s, s->gspec(), u0, 200);
  const double h0 = energy_values(*s, u0)[0];
  for (const auto& u : r.states) EXPECT_NEAR(energy_values(*s, u)[0], h0, 1e-11);
}

TEST(Integrators, DampedDiscreteGradientDissipates) {
  const auto s = ode_system("pendulum", 0.3);
  StepperConfig cfg;
  cfg.dt = 0.1;
  const RolloutResult r = rollout(cfg, *s, s->gspec(), Tensor::matrix({{1.0, 0.5}}), 100);
  for (std::size_t i = 1; i < r.states.size(); ++i)
    EXPECT_LE(energy_values(*s, r.states[i])[0], energy_values(*s, r.states[i - 1])[0] + 1e-12);
}

TEST(Integrators, LeapfrogRolloutMatchesHandStep) {
  const auto s = ode_system("mass_spring");
  StepperConfig cfg;
  cfg.kind = StepperKind::leapfrog;
  cfg.dt = 0.1;
  const RolloutResult r = rollout(cfg, *s, s->gspec(), Tensor::matrix({{1.0, 0.5}}), 1);
  const double ph = 0.5 - 0.05 * 1.0, q1 = 1.0 + 0.1 * ph;
  EXPECT_NEAR(r.states[1][0], q1, 1e-15);
  EXPECT_NEAR(r.states[1][1], ph - 0.05 * q1, 1e-15);
}

TEST(Integrators, RolloutZeroStepsEchoesInitialState) {
  const auto s = ode_system("pendulum");
  for (auto kind : {StepperKind::rk2, StepperKind::dopri, StepperKind::discrete_gradient}) {
    StepperConfig cfg;
    cfg.kind = kind;
    const Tensor u0 = Tensor::matrix({{0.3, 0.1}});
    const RolloutResult r = rollout(cfg, *s, s->gspec(), u0, 0);
    ASSERT_EQ(r.states.size(), 1u);
    EXPECT_TRUE(r.states[0].identical(u0));
  }
}

TEST(Integrators, SecondOrderConvergence) {
  const auto s = ode_system("pendulum");
  const Tensor u0 = Tensor::matrix({{1.0, 0.0}});
  const RolloutResult ref = integrate_dopri(make_rhs(*s, s->gspec()), u0, {0.0, 1.0}, {1e-12, 1e-12});
  double prev = 0.0;
  for (double dt : {0.1, 0.05}) {
    StepperConfig cfg;
    cfg.dt = dt;
    cfg.dg.tol = 1e-14;
    const auto r = rollout(cfg, *s, s->gspec(), u0, static_cast<std::size_t>(std::lround(1.0 / dt)));
    const double err = max_abs_diff(r.states.back(), ref.states.back());
    if (prev > 0) {
      EXPECT_NEAR(std::log2(prev / err), 2.0, 0.2);
    }
    prev = err;
  }
}

TEST(Integrators, StepperNames) {
  for (auto k : {StepperKind::rk2, StepperKind::dopri, StepperKind::leapfrog, StepperKind::discrete_gradient})
    EXPECT_EQ(stepper_from_string(to_string(k)), k);
  EXPECT_THROW(stepper_from_string("euler"), std::invalid_argument);
}
